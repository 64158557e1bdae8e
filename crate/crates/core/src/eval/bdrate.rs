use crate::error::{Error, Result};

/// How each curve's log-rate is interpolated over quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BdInterp {
    /// Least-squares cubic polynomial (classic Bjøntegaard).
    Cubic,
    /// Piecewise cubic Hermite (monotone, Fritsch–Carlson slopes).
    Pchip,
}

/// Average bitrate difference of `test` against `anchor` at equal PSNR, in
/// percent. Curves are `(bpp, psnr)` points.
pub fn bd_rate(anchor: &[(f64, f64)], test: &[(f64, f64)], interp: BdInterp) -> Result<f64> {
    let prep = |c: &[(f64, f64)], name: &str| -> Result<Vec<(f64, f64)>> {
        if c.len() < 4 {
            return Err(Error::Eval(format!("{name} curve has {} points, BD-rate needs at least 4", c.len())));
        }
        let mut pts = Vec::with_capacity(c.len());
        for &(r, q) in c {
            if !(r > 0.0 && r.is_finite() && q.is_finite()) {
                return Err(Error::Eval(format!("{name} curve has an invalid point ({r}, {q})")));
            }
            pts.push((q, r.log10()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[1].0 - w[0].0 <= 0.0) {
            return Err(Error::Eval(format!("{name} curve repeats a quality value")));
        }
        Ok(pts)
    };
    let a = prep(anchor, "anchor")?;
    let t = prep(test, "test")?;
    let lo = a[0].0.max(t[0].0);
    let hi = a[a.len() - 1].0.min(t[t.len() - 1].0);
    if !(hi > lo) {
        return Err(Error::Eval(format!(
            "curves do not overlap in quality (anchor {:.3}..{:.3} dB, test {:.3}..{:.3} dB)",
            a[0].0,
            a[a.len() - 1].0,
            t[0].0,
            t[t.len() - 1].0
        )));
    }
    let integral = |pts: &[(f64, f64)]| match interp {
        BdInterp::Cubic => {
            let c = polyfit3(pts);
            poly_integral(&c, hi) - poly_integral(&c, lo)
        }
        BdInterp::Pchip => pchip_integral(pts, lo, hi),
    };
    let diff = (integral(&t) - integral(&a)) / (hi - lo);
    Ok((10f64.powf(diff) - 1.0) * 100.0)
}

/// Coefficients `c0..c3` of the least-squares cubic through `(x, y)`.
fn polyfit3(pts: &[(f64, f64)]) -> [f64; 4] {
    // Fit in a centred, scaled variable for conditioning, then expand.
    let n = pts.len() as f64;
    let m = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let s = pts.iter().map(|p| (p.0 - m).abs()).fold(0.0, f64::max).max(1e-12);
    let mut ata = [[0.0; 4]; 4];
    let mut aty = [0.0; 4];
    for &(x, y) in pts {
        let u = (x - m) / s;
        let pw = [1.0, u, u * u, u * u * u];
        for i in 0..4 {
            aty[i] += pw[i] * y;
            for j in 0..4 {
                ata[i][j] += pw[i] * pw[j];
            }
        }
    }
    let b = solve4(ata, aty);
    // p(x) = Σ b_k ((x − m)/s)^k expanded in powers of x.
    let mut c = [0.0; 4];
    let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
    for k in 0..4 {
        let scale = b[k] / s.powi(k as i32);
        for j in 0..=k {
            c[j] += scale * binom[k][j] * (-m).powi((k - j) as i32);
        }
    }
    c
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> [f64; 4] {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for k in col..4 {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn poly_integral(c: &[f64; 4], x: f64) -> f64 {
    c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0
}

/// Fritsch–Carlson slopes at the knots.
fn pchip_slopes(pts: &[(f64, f64)]) -> Vec<f64> {
    let n = pts.len();
    let h: Vec<f64> = pts.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let d: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

/// Exact integral of the Hermite interpolant over `[lo, hi]`.
fn pchip_integral(pts: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let m = pchip_slopes(pts);
    let mut total = 0.0;
    for k in 0..pts.len() - 1 {
        let (x0, y0) = pts[k];
        let (x1, y1) = pts[k + 1];
        let a = lo.max(x0);
        let b = hi.min(x1);
        if b <= a {
            continue;
        }
        let h = x1 - x0;
        // y(t) in t = (x − x0)/h, as a cubic: y0 + m0 h t + c2 t² + c3 t³
        let (m0, m1) = (m[k] * h, m[k + 1] * h);
        let c2 = 3.0 * (y1 - y0) - 2.0 * m0 - m1;
        let c3 = 2.0 * (y0 - y1) + m0 + m1;
        let prim = |t: f64| h * (y0 * t + m0 * t * t / 2.0 + c2 * t.powi(3) / 3.0 + c3 * t.powi(4) / 4.0);
        total += prim((b - x0) / h) - prim((a - x0) / h);
    }
    total
}
