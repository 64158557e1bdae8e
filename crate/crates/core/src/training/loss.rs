use crate::error::{Error, Result};
use crate::freq::Band;
use crate::model::Forward;
use crate::tensor::{Float, Var};

/// Scale that puts the MSE of `[0, 1]` images on the 8-bit scale.
pub const DISTORTION_SCALE: f64 = 255.0 * 255.0;

/// Labels of the six rate terms, in container order.
pub const RATE_TERMS: [&str; 6] = ["R_zH", "R_zM", "R_zL", "R_yH", "R_yM", "R_yL"];

/// Rate-distortion objective `L = λ·255²·MSE + R` with `R` in bits per pixel.
pub struct RdLoss<'t, T: Float> {
    pub total: Var<'t, T>,
    /// `255²·MSE`.
    pub distortion: f64,
    /// Plain MSE on `[0, 1]` values.
    pub mse: f64,
    pub bpp: f64,
    /// Bits per pixel of zH, zM, zL, yH, yM, yL.
    pub rates: [f64; 6],
}

impl<T: Float> RdLoss<'_, T> {
    pub fn value(&self) -> f64 {
        self.total.item().f64()
    }
}

fn finite(term: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { term: term.to_string() })
    }
}

/// Loss of a training-path forward pass on the batch `x`.
pub fn rd_loss<'t, T: Float>(x: Var<'t, T>, fwd: &Forward<'t, T>, lambda: f64) -> Result<RdLoss<'t, T>> {
    let s = x.shape();
    let pixels = (s[0] * s[2] * s[3]) as f64;
    let tape = x.tape();
    let mse = (fwd.x_hat - x).square().mean();
    let d = mse.mul_scalar(T::of(DISTORTION_SCALE));
    let (ybits, zbits) = fwd.band_bits();
    let mut terms = Vec::with_capacity(6);
    for bits in [&zbits, &ybits] {
        for b in Band::ALL {
            terms.push(*bits.band(b));
        }
    }
    let mut rates = [0.0; 6];
    for (i, t) in terms.iter().enumerate() {
        rates[i] = finite(RATE_TERMS[i], t.item().f64() / pixels)?;
    }
    let rate = tape.sum_all(&terms).mul_scalar(T::of(1.0 / pixels));
    let distortion = finite("D", d.item().f64())?;
    let total = d.mul_scalar(T::of(lambda)) + rate;
    finite("L", total.item().f64())?;
    Ok(RdLoss {
        total,
        distortion,
        mse: mse.item().f64(),
        bpp: rates.iter().sum(),
        rates,
    })
}
