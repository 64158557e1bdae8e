//! Independent scalar references: series error function, compensated sums.

/// erf by its Maclaurin series (|x| ≤ 3) or the Laplace continued fraction
/// for erfc (|x| > 3).
pub fn erf(x: f64) -> f64 {
    if x.abs() <= 3.0 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        let mut n = 0.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            n += 1.0;
            term *= -x2 / n;
            sum += term / (2.0 * n + 1.0);
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    } else {
        x.signum() * (1.0 - erfc_cf(x.abs()))
    }
}

/// erfc(x) for x > 0 via a continued fraction evaluated bottom-up.
pub fn erfc_cf(x: f64) -> f64 {
    let mut f = 0.0;
    for k in (1..200).rev() {
        f = (k as f64 / 2.0) / (x + f);
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + f)
}

/// Standard normal CDF from the reference erf.
pub fn phi(x: f64) -> f64 {
    if x < -3.0 * std::f64::consts::SQRT_2 {
        0.5 * erfc_cf(-x / std::f64::consts::SQRT_2)
    } else {
        0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
    }
}

/// Kahan-compensated sum.
pub fn kahan(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}
