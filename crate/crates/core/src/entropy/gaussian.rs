use super::{P_MIN, SIGMA_MIN};
use crate::tensor::{Float, Var};

/// Mass of `N(μ, σ²) * U(−Δ/2, Δ/2)` at `ỹ`:
/// `Φ((ỹ−μ+Δ/2)/σ) − Φ((ỹ−μ−Δ/2)/σ)`, floored at [`P_MIN`].
///
/// Evaluated on `|ỹ − μ|` so both CDF arguments sit in the accurate lower
/// tail. All four inputs broadcast.
pub fn gaussian_uniform_likelihood<'t, T: Float>(
    y: Var<'t, T>,
    mu: Var<'t, T>,
    sigma: Var<'t, T>,
    delta: Var<'t, T>,
) -> Var<'t, T> {
    let sigma = sigma.clamp_min(T::of(SIGMA_MIN));
    let v = (y - mu).abs();
    let half = delta.mul_scalar(T::of(0.5));
    let upper = ((half - v) / sigma).normal_cdf();
    let lower = ((half.neg() - v) / sigma).normal_cdf();
    (upper - lower).clamp_min(T::of(P_MIN))
}

/// Standard normal CDF in double precision.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Scalar form of [`gaussian_uniform_likelihood`] without the floor.
pub fn gaussian_mass(y: f64, mu: f64, sigma: f64, delta: f64) -> f64 {
    let v = (y - mu).abs();
    let h = 0.5 * delta;
    (normal_cdf((h - v) / sigma) - normal_cdf((-h - v) / sigma)).max(0.0)
}
