//! Convolution layers and (inverse) generalized divisive normalization.

use crate::params::{Builder, ParamId, ParamStore};
use crate::tensor::{ConvGeom, Float, Tape, Tensor, Var};

/// Lower bound added to the GDN offset, keeping the denominator positive.
pub const GDN_BETA_MIN: f64 = 1e-6;

/// Default negative slope of the Leaky ReLU used throughout the network.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub geom: ConvGeom,
    pub c_in: usize,
    pub c_out: usize,
}

impl Conv2d {
    pub fn new<T: Float>(
        b: &mut Builder<'_, T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        geom: ConvGeom,
        bias: bool,
    ) -> Self {
        let mut sb = b.sub(name);
        let fan_in = (c_in * geom.kernel * geom.kernel).max(1) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let weight = sb.uniform("weight", &[c_out, c_in, geom.kernel, geom.kernel], bound);
        let bias = bias.then(|| sb.uniform("bias", &[c_out], bound));
        Conv2d {
            weight,
            bias,
            geom,
            c_in,
            c_out,
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Var<'t, T> {
        let w = store.var(tape, self.weight);
        let b = self.bias.map(|b| store.var(tape, b));
        x.conv2d(w, b, self.geom)
    }
}

/// Transposed convolution upsampling by `geom.stride`.
#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub geom: ConvGeom,
    pub c_in: usize,
    pub c_out: usize,
}

impl ConvTranspose2d {
    pub fn new<T: Float>(
        b: &mut Builder<'_, T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        geom: ConvGeom,
        bias: bool,
    ) -> Self {
        let mut sb = b.sub(name);
        let fan_in = (c_out * geom.kernel * geom.kernel).max(1) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let weight = sb.uniform("weight", &[c_in, c_out, geom.kernel, geom.kernel], bound);
        let bias = bias.then(|| sb.uniform("bias", &[c_out], bound));
        ConvTranspose2d {
            weight,
            bias,
            geom,
            c_in,
            c_out,
        }
    }

    /// Output spatial size is `stride ×` the input size.
    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Var<'t, T> {
        let s = x.shape();
        let out_hw = (s[2] * self.geom.stride, s[3] * self.geom.stride);
        let w = store.var(tape, self.weight);
        let b = self.bias.map(|b| store.var(tape, b));
        x.conv_transpose2d(w, b, self.geom, out_hw)
    }
}

/// `y_i = x_i / sqrt(β_i + Σ_j γ_ij x_j²)`, or the multiplicative inverse
/// form. `β = β_min + t²` and `γ = g²` keep both nonnegative.
#[derive(Clone, Debug)]
pub struct Gdn {
    pub beta_t: ParamId,
    pub gamma_g: ParamId,
    pub inverse: bool,
    pub channels: usize,
}

impl Gdn {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, channels: usize, inverse: bool) -> Self {
        let mut sb = b.sub(name);
        let beta_t = sb.constant("beta_t", &[channels], (1.0 - GDN_BETA_MIN).sqrt());
        let mut g = Tensor::<T>::zeros(&[channels, channels, 1, 1]);
        {
            let rng = sb.rng();
            use rand::Rng;
            for i in 0..channels {
                for j in 0..channels {
                    let v = if i == j {
                        0.1f64.sqrt()
                    } else {
                        rng.gen_range(-1e-2..1e-2)
                    };
                    g.data_mut()[i * channels + j] = T::of(v);
                }
            }
        }
        let gamma_g = sb.tensor("gamma_g", g);
        Gdn {
            beta_t,
            gamma_g,
            inverse,
            channels,
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Var<'t, T> {
        let beta = store
            .var(tape, self.beta_t)
            .square()
            .add_scalar(T::of(GDN_BETA_MIN));
        let gamma = store.var(tape, self.gamma_g).square();
        let norm = x.square().conv2d(gamma, Some(beta), ConvGeom::same(1)).sqrt();
        if self.inverse {
            x * norm
        } else {
            x / norm
        }
    }
}
