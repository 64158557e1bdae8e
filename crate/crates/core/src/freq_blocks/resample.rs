use crate::nn::{Conv2d, ConvTranspose2d};
use crate::params::{Builder, ParamStore};
use crate::tensor::{ConvGeom, Float, Tape, Var};

/// Geometry of a learned resampling conv by an integer `factor` (1, 2 or 4).
/// Factor 1 is a same-padded `kernel`×`kernel` conv.
pub fn resample_geom(factor: usize, kernel: usize) -> ConvGeom {
    match factor {
        1 => ConvGeom::same(kernel),
        2 => ConvGeom::new(3, 2, 1),
        4 => ConvGeom::new(5, 4, 2),
        f => panic!("unsupported resampling factor {f}"),
    }
}

/// A conv that moves features between two band levels: strided conv when
/// the destination is coarser, transposed conv when it is finer.
#[derive(Clone, Debug)]
pub enum Resampler {
    Same(Conv2d),
    Down(Conv2d),
    Up(ConvTranspose2d),
}

impl Resampler {
    /// `levels` is `dst_level - src_level` (positive: destination is coarser).
    pub fn new<T: Float>(
        b: &mut Builder<'_, T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        levels: i32,
        kernel: usize,
        bias: bool,
    ) -> Self {
        let factor = 1usize << levels.unsigned_abs();
        let geom = resample_geom(factor, kernel);
        match levels.signum() {
            0 => Resampler::Same(Conv2d::new(b, name, c_in, c_out, geom, bias)),
            1 => Resampler::Down(Conv2d::new(b, name, c_in, c_out, geom, bias)),
            _ => Resampler::Up(ConvTranspose2d::new(b, name, c_in, c_out, geom, bias)),
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Var<'t, T> {
        match self {
            Resampler::Same(c) | Resampler::Down(c) => c.forward(tape, store, x),
            Resampler::Up(c) => c.forward(tape, store, x),
        }
    }

    pub fn bias(&self) -> Option<crate::params::ParamId> {
        match self {
            Resampler::Same(c) | Resampler::Down(c) => c.bias,
            Resampler::Up(c) => c.bias,
        }
    }
}
