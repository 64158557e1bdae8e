//! Per-band learned quantization steps.
//!
//! A small head maps the band's hyperprior features to a positive step map
//! `Δ` of the same shape as the band's latent. Training perturbs the latent
//! with `U(-Δ/2, Δ/2)` noise; coding rounds it to the grid `Δ·k`.

use rand::Rng;

use crate::nn::{Conv2d, LEAKY_SLOPE};
use crate::params::{Builder, ParamStore};
use crate::tensor::{ConvGeom, Float, Tape, Tensor, Var};

pub const DELTA_MIN: f64 = 0.05;
pub const DELTA_MAX: f64 = 4.0;

/// Scale applied to the output layer's initial weights so the step starts
/// close to one for generic inputs.
const OUT_INIT_SCALE: f64 = 0.1;

/// `Δ = exp(clamp(conv1x1(lrelu(conv1x1(Ψ))), ln Δ_min, ln Δ_max))`.
///
/// Biases start at zero, so a zero hyperprior gives `Δ = 1` exactly.
/// A frozen head has no parameters and always returns `Δ = 1`.
#[derive(Clone, Debug)]
pub struct DeltaHead {
    pub channels: usize,
    pub layers: Option<(Conv2d, Conv2d)>,
}

impl DeltaHead {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, psi_ch: usize, hidden: usize, out: usize) -> Self {
        let mut sb = b.sub(name);
        let conv1 = Conv2d::new(&mut sb, "conv1", psi_ch, hidden, ConvGeom::same(1), true);
        let conv2 = Conv2d::new(&mut sb, "conv2", hidden, out, ConvGeom::same(1), true);
        drop(sb);
        let store = b.store_mut();
        for c in [&conv1, &conv2] {
            store.get_mut(c.bias.expect("head convs carry a bias")).data_mut().fill(T::zero());
        }
        store.get_mut(conv2.weight).scale(T::of(OUT_INIT_SCALE));
        DeltaHead {
            channels: out,
            layers: Some((conv1, conv2)),
        }
    }

    pub fn frozen(out: usize) -> Self {
        DeltaHead {
            channels: out,
            layers: None,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.layers.is_none()
    }

    pub fn forward<'t, T: Float>(&self, tape: &'t Tape<T>, store: &ParamStore<T>, psi: Var<'t, T>) -> Var<'t, T> {
        let s = psi.shape();
        match &self.layers {
            None => tape.constant(Tensor::full(&[s[0], self.channels, s[2], s[3]], T::one())),
            Some((c1, c2)) => {
                let h = c1.forward(tape, store, psi).leaky_relu(T::of(LEAKY_SLOPE));
                c2.forward(tape, store, h)
                    .clamp(T::of(DELTA_MIN.ln()), T::of(DELTA_MAX.ln()))
                    .exp()
            }
        }
    }
}

/// `ỹ = y + Δ·(v − ½)` with fresh `v ~ U(0, 1)` per element.
pub fn quantize_train<'t, T: Float, R: Rng>(y: Var<'t, T>, delta: Var<'t, T>, rng: &mut R) -> Var<'t, T> {
    let v = Tensor::from_fn(&y.shape(), |_| T::of(rng.gen::<f64>() - 0.5));
    y + delta * y.tape().constant(v)
}

/// Round half away from zero; the tie rule shared by encoder and decoder.
#[inline]
pub fn round_symbol<T: Float>(v: T) -> i32 {
    v.round().to_i32().unwrap_or(if v > T::zero() { i32::MAX } else { i32::MIN })
}

/// `k = round(y/Δ)`, `ŷ = Δ·k`.
pub fn quantize_test<T: Float>(y: &Tensor<T>, delta: &Tensor<T>) -> (Vec<i32>, Tensor<T>) {
    assert_eq!(y.shape(), delta.shape(), "latent and step shapes differ");
    let k: Vec<i32> = y
        .data()
        .iter()
        .zip(delta.data())
        .map(|(&v, &d)| round_symbol(v / d))
        .collect();
    let yq = dequantize(&k, delta);
    (k, yq)
}

/// `ŷ = Δ·k`.
pub fn dequantize<T: Float>(k: &[i32], delta: &Tensor<T>) -> Tensor<T> {
    assert_eq!(k.len(), delta.numel());
    Tensor::new(
        delta.shape(),
        k.iter().zip(delta.data()).map(|(&k, &d)| T::of(k as f64) * d).collect(),
    )
}
