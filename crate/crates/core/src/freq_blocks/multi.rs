use super::resample::Resampler;
use crate::error::{shape_err, Result};
use crate::freq::{check_triple, Band, Triple};
use crate::nn::{Conv2d, ConvTranspose2d, LEAKY_SLOPE};
use crate::params::{Builder, ParamStore};
use crate::tensor::{ConvGeom, Float, Tape, Var};

/// One learned path from a source band to a destination band.
#[derive(Clone, Debug)]
pub struct CrossTerm {
    pub src: Band,
    pub dst: Band,
    pub conv: Resampler,
}

/// Three-band first-stage exchange. Every present output band sums an
/// intra-band conv and learned resamplings of the other present input bands;
/// the resampling factor is the resolution ratio between the two bands.
#[derive(Clone, Debug)]
pub struct MoConv {
    pub c_in: [usize; 3],
    pub c_out: [usize; 3],
    pub terms: Vec<CrossTerm>,
}

impl MoConv {
    pub fn new<T: Float>(
        b: &mut Builder<'_, T>,
        name: &str,
        c_in: [usize; 3],
        c_out: [usize; 3],
        kernel: usize,
    ) -> Self {
        let mut sb = b.sub(name);
        let mut terms = Vec::new();
        for dst in Band::ALL {
            if c_out[dst.index()] == 0 {
                continue;
            }
            // intra term first so it carries the destination's bias
            let order = std::iter::once(dst).chain(Band::ALL.into_iter().filter(|&s| s != dst));
            let mut first = true;
            for src in order {
                if c_in[src.index()] == 0 {
                    continue;
                }
                let levels = dst.level() as i32 - src.level() as i32;
                let conv = Resampler::new(
                    &mut sb,
                    &format!("{}2{}", src.short().to_ascii_lowercase(), dst.short().to_ascii_lowercase()),
                    c_in[src.index()],
                    c_out[dst.index()],
                    levels,
                    kernel,
                    first,
                );
                first = false;
                terms.push(CrossTerm { src, dst, conv });
            }
        }
        MoConv { c_in, c_out, terms }
    }

    pub fn term(&self, src: Band, dst: Band) -> Option<&Resampler> {
        self.terms
            .iter()
            .find(|t| t.src == src && t.dst == dst)
            .map(|t| &t.conv)
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: &Triple<Var<'t, T>>,
    ) -> Result<Triple<Var<'t, T>>> {
        let (_, h, w) = check_triple(x, self.c_in)?;
        for b in Band::ALL {
            let f = 1usize << b.level();
            if self.c_out[b.index()] > 0 && (h % f != 0 || w % f != 0) {
                return shape_err(format!(
                    "{h}x{w} high band cannot host a {} band at 1/{f} resolution",
                    b.name()
                ));
            }
        }
        let mut out: Triple<Var<'t, T>> = Triple::default();
        for t in &self.terms {
            let y = t.conv.forward(tape, store, *x.band(t.src));
            let acc = match out.take(t.dst) {
                Some(acc) => acc + y,
                None => y,
            };
            out.set(t.dst, Some(acc));
        }
        Ok(out)
    }
}

/// Per-band second stage shared by the down and up residual blocks.
#[derive(Clone, Debug)]
enum Stage {
    Down(Conv2d),
    Up(ConvTranspose2d),
}

/// Multi-frequency two-stage octave residual block.
///
/// `Y^b = main_b(lrelu(MoConv(X)^b)) + shortcut_b(X^b)`; the main path is a
/// stride-2 conv (down) or stride-2 transposed conv (up); the shortcut is a
/// 1×1 stride-2 conv (down) or 1×1 conv followed by nearest ×2 (up).
#[derive(Clone, Debug)]
pub struct Mtorb {
    pub moconv: MoConv,
    main: Triple<Stage>,
    shortcut: Triple<Conv2d>,
    pub up: bool,
    pub slope: f64,
}

impl Mtorb {
    pub fn down<T: Float>(b: &mut Builder<'_, T>, name: &str, c_in: [usize; 3], c_out: [usize; 3]) -> Self {
        Self::build(b, name, c_in, c_out, false)
    }

    pub fn up<T: Float>(b: &mut Builder<'_, T>, name: &str, c_in: [usize; 3], c_out: [usize; 3]) -> Self {
        Self::build(b, name, c_in, c_out, true)
    }

    fn build<T: Float>(
        b: &mut Builder<'_, T>,
        name: &str,
        c_in: [usize; 3],
        c_out: [usize; 3],
        up: bool,
    ) -> Self {
        let mut sb = b.sub(name);
        let moconv = MoConv::new(&mut sb, "moconv", c_in, c_out, 3);
        let mut main = Triple::default();
        let mut shortcut = Triple::default();
        for band in Band::ALL {
            let (ci, co) = (c_in[band.index()], c_out[band.index()]);
            if co == 0 {
                continue;
            }
            let tag = band.short().to_ascii_lowercase();
            let geom = ConvGeom::new(3, 2, 1);
            let stage = if up {
                Stage::Up(ConvTranspose2d::new(&mut sb, &format!("main_{tag}"), co, co, geom, true))
            } else {
                Stage::Down(Conv2d::new(&mut sb, &format!("main_{tag}"), co, co, geom, true))
            };
            main.set(band, Some(stage));
            if ci > 0 {
                let g = if up { ConvGeom::same(1) } else { ConvGeom::new(1, 2, 0) };
                shortcut.set(
                    band,
                    Some(Conv2d::new(&mut sb, &format!("shortcut_{tag}"), ci, co, g, false)),
                );
            }
        }
        Mtorb {
            moconv,
            main,
            shortcut,
            up,
            slope: LEAKY_SLOPE,
        }
    }

    /// Output of the first stage only (before activation).
    pub fn first_stage<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: &Triple<Var<'t, T>>,
    ) -> Result<Triple<Var<'t, T>>> {
        if !self.up {
            for (b, v) in x.iter() {
                let s = v.shape();
                if s.len() == 4 && (s[2] % 2 != 0 || s[3] % 2 != 0) {
                    return shape_err(format!(
                        "{} band is {}x{}; stride-2 blocks need even dims",
                        b.name(),
                        s[2],
                        s[3]
                    ));
                }
            }
        }
        self.moconv.forward(tape, store, x)
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: &Triple<Var<'t, T>>,
    ) -> Result<Triple<Var<'t, T>>> {
        let yp = self.first_stage(tape, store, x)?;
        let slope = T::of(self.slope);
        let mut out = Triple::default();
        for (band, stage) in self.main.iter() {
            let a = yp.band(band).leaky_relu(slope);
            let mut y = match stage {
                Stage::Down(c) => c.forward(tape, store, a),
                Stage::Up(c) => c.forward(tape, store, a),
            };
            if let (Some(sc), Some(xb)) = (self.shortcut.get(band), x.get(band)) {
                let mut s = sc.forward(tape, store, *xb);
                if self.up {
                    s = s.upsample_nearest(2);
                }
                y = y + s;
            }
            out.set(band, Some(y));
        }
        Ok(out)
    }

    /// Main-path conv of `band` (second stage).
    pub fn main_weight(&self, band: Band) -> Option<crate::params::ParamId> {
        self.main.get(band).map(|s| match s {
            Stage::Down(c) => c.weight,
            Stage::Up(c) => c.weight,
        })
    }

    pub fn shortcut(&self, band: Band) -> Option<&Conv2d> {
        self.shortcut.get(band)
    }
}
