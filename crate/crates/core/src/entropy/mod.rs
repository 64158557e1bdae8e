//! Probability models for the latents: a Gaussian convolved with a scaled
//! uniform for the main latents, a learned factorized density for the hyper
//! latents, and the integer frequency tables the range coder consumes.

mod factorized;
mod gaussian;
mod tables;

pub use factorized::{FactorizedModel, FILTERS, INIT_SCALE};
pub use gaussian::{gaussian_mass, gaussian_uniform_likelihood, normal_cdf};
pub use tables::{CdfRow, ScaleTable, FREQ_BITS, FREQ_TOTAL, MAX_ROW_SYMBOLS, TAIL_MASS};

use crate::tensor::{Float, Var};

/// Floor applied to every likelihood before taking logs.
pub const P_MIN: f64 = 1e-9;

/// Lower bound on predicted scales.
pub const SIGMA_MIN: f64 = 0.11;

/// `Σ −log2 p`, as a `[1]` var.
pub fn rate_bits<'t, T: Float>(p: Var<'t, T>) -> Var<'t, T> {
    p.log2().neg().sum()
}
