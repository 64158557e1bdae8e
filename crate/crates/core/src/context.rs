//! Context modelling for the main latents: a two-stage checkerboard context
//! inside each band, downsampling cross-band contexts from already decoded
//! higher bands, and the per-band entropy parameter networks.
//!
//! Decoding order is high, mid, low; inside a band the anchors
//! (`(i + j)` even) come first and see no spatial context, the remaining
//! positions see a 5×5 convolution of the decoded anchors.

use crate::entropy::SIGMA_MIN;
use crate::error::{shape_err, Result};
use crate::freq::{Band, Triple};
use crate::nn::{Conv2d, LEAKY_SLOPE};
use crate::params::{Builder, ParamStore};
use crate::tensor::{ConvGeom, Float, Tape, Tensor, Var};

pub const INTRA_KERNEL: usize = 5;

/// Which cross-band contexts are wired in. Disabled ones feed zero maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossContexts {
    /// high → low only.
    HighToLow,
    /// high → low and mid → low.
    PlusMidToLow,
    /// high → low, mid → low and high → mid.
    Full,
}

impl CrossContexts {
    pub fn id(self) -> u8 {
        match self {
            CrossContexts::HighToLow => 1,
            CrossContexts::PlusMidToLow => 2,
            CrossContexts::Full => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(CrossContexts::HighToLow),
            2 => Some(CrossContexts::PlusMidToLow),
            3 => Some(CrossContexts::Full),
            _ => None,
        }
    }

    fn enabled(self, src: Band, dst: Band) -> bool {
        match (src, dst) {
            (Band::High, Band::Low) => true,
            (Band::Mid, Band::Low) => self != CrossContexts::HighToLow,
            (Band::High, Band::Mid) => self == CrossContexts::Full,
            _ => false,
        }
    }
}

#[inline]
pub fn is_anchor(i: usize, j: usize) -> bool {
    (i + j) % 2 == 0
}

/// `[1, 1, h, w]` mask, one on anchors (or on non-anchors when `anchors` is false).
pub fn checkerboard<T: Float>(h: usize, w: usize, anchors: bool) -> Tensor<T> {
    Tensor::from_fn(&[1, 1, h, w], |idx| {
        if is_anchor(idx / w, idx % w) == anchors {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Two-stage checkerboard context of one band: zero at anchors,
/// `conv5x5(ŷ ⊙ anchors)` elsewhere.
#[derive(Clone, Debug)]
pub struct IntraContext {
    pub conv: Conv2d,
}

impl IntraContext {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c_in: usize, c_out: usize) -> Self {
        IntraContext {
            conv: Conv2d::new(b, name, c_in, c_out, ConvGeom::same(INTRA_KERNEL), true),
        }
    }

    pub fn forward<'t, T: Float>(&self, tape: &'t Tape<T>, store: &ParamStore<T>, y_hat: Var<'t, T>) -> Var<'t, T> {
        let s = y_hat.shape();
        let anchors = tape.constant(checkerboard(s[2], s[3], true));
        let others = tape.constant(checkerboard(s[2], s[3], false));
        self.conv.forward(tape, store, y_hat * anchors) * others
    }

    /// Context of decoding stage `stage` (1: anchors, 2: the rest). Stage 2
    /// needs the dequantized anchors; values at non-anchor positions of
    /// `anchors` are ignored.
    pub fn stage<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        stage: usize,
        y_shape: &[usize],
        anchors: Option<Var<'t, T>>,
    ) -> Result<Var<'t, T>> {
        match (stage, anchors) {
            (1, _) => Ok(self.anchor_stage(tape, y_shape)),
            (2, Some(a)) => {
                if a.shape() != y_shape {
                    return shape_err(format!("stage-2 anchors {:?} do not match latent {:?}", a.shape(), y_shape));
                }
                Ok(self.forward(tape, store, a))
            }
            (2, None) => shape_err("stage-2 context needs the decoded anchors"),
            (s, _) => shape_err(format!("context stage {s} does not exist (stages are 1 and 2)")),
        }
    }

    /// Context seen by the anchor stage: all zeros.
    pub fn anchor_stage<'t, T: Float>(&self, tape: &'t Tape<T>, y_shape: &[usize]) -> Var<'t, T> {
        tape.constant(Tensor::zeros(&[y_shape[0], self.conv.c_out, y_shape[2], y_shape[3]]))
    }
}

/// Stride-2 residual block: `conv3(lrelu(conv3_s2(x))) + conv1_s2(x)`.
#[derive(Clone, Debug)]
pub struct DownResBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub skip: Conv2d,
}

impl DownResBlock {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c_in: usize, c_out: usize) -> Self {
        let mut sb = b.sub(name);
        DownResBlock {
            conv1: Conv2d::new(&mut sb, "conv1", c_in, c_out, ConvGeom::new(3, 2, 1), true),
            conv2: Conv2d::new(&mut sb, "conv2", c_out, c_out, ConvGeom::same(3), true),
            skip: Conv2d::new(&mut sb, "skip", c_in, c_out, ConvGeom::new(1, 2, 0), true),
        }
    }

    pub fn forward<'t, T: Float>(&self, tape: &'t Tape<T>, store: &ParamStore<T>, x: Var<'t, T>) -> Var<'t, T> {
        let h = self.conv1.forward(tape, store, x).leaky_relu(T::of(LEAKY_SLOPE));
        self.conv2.forward(tape, store, h) + self.skip.forward(tape, store, x)
    }
}

/// Chain of [`DownResBlock`]s carrying a decoded band down to a lower band's
/// resolution.
#[derive(Clone, Debug)]
pub struct CrossContext {
    pub src: Band,
    pub dst: Band,
    pub blocks: Vec<DownResBlock>,
}

impl CrossContext {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, src: Band, dst: Band, c_in: usize, c_out: usize) -> Self {
        let levels = (dst.level() - src.level()) as usize;
        assert!(levels >= 1, "cross context must go to a lower band");
        let mut sb = b.sub(&format!("{}2{}", src.short(), dst.short()));
        let blocks = (0..levels)
            .map(|i| DownResBlock::new(&mut sb, &format!("rb{i}"), if i == 0 { c_in } else { c_out }, c_out))
            .collect();
        CrossContext { src, dst, blocks }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
        dst_hw: (usize, usize),
    ) -> Result<Var<'t, T>> {
        let s = x.shape();
        let f = 1 << self.blocks.len();
        if s[2] != dst_hw.0 * f || s[3] != dst_hw.1 * f {
            return shape_err(format!(
                "{}→{} context: source {}x{} does not map onto {}x{}",
                self.src.name(),
                self.dst.name(),
                s[2],
                s[3],
                dst_hw.0,
                dst_hw.1
            ));
        }
        Ok(self.blocks.iter().fold(x, |h, rb| rb.forward(tape, store, h)))
    }
}

/// Three pointwise layers mapping concatenated contexts and hyperprior to
/// `(μ, σ)` with `σ = max(softplus(·), σ_min)`.
#[derive(Clone, Debug)]
pub struct ParamNet {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub conv3: Conv2d,
    pub channels: usize,
}

impl ParamNet {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c_in: usize, m: usize, c_band: usize) -> Self {
        let mut sb = b.sub(name);
        let g = ConvGeom::same(1);
        ParamNet {
            conv1: Conv2d::new(&mut sb, "conv1", c_in, 2 * m, g, true),
            conv2: Conv2d::new(&mut sb, "conv2", 2 * m, m, g, true),
            conv3: Conv2d::new(&mut sb, "conv3", m, 2 * c_band, g, true),
            channels: c_band,
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> (Var<'t, T>, Var<'t, T>) {
        let slope = T::of(LEAKY_SLOPE);
        let h = self.conv1.forward(tape, store, x).leaky_relu(slope);
        let h = self.conv2.forward(tape, store, h).leaky_relu(slope);
        let out = self.conv3.forward(tape, store, h);
        let c = self.channels;
        let mu = out.narrow_channels(0, c);
        let sigma = out.narrow_channels(c, c).softplus().clamp_min(T::of(SIGMA_MIN));
        (mu, sigma)
    }
}

/// Mean and scale maps of one band.
pub struct EntropyParams<'t, T: Float> {
    pub mu: Var<'t, T>,
    pub sigma: Var<'t, T>,
}

#[derive(Clone, Debug)]
pub struct ContextModel {
    /// Width of every context and hyperprior map (twice the latent channels).
    pub ctx_channels: usize,
    pub counts: [usize; 3],
    pub cross_contexts: CrossContexts,
    pub intra: Vec<IntraContext>,
    pub h2m: CrossContext,
    pub h2l: CrossContext,
    pub m2l: CrossContext,
    pub nets: Vec<ParamNet>,
}

impl ContextModel {
    /// `counts` are the latent channels per band, `m` their sum.
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, counts: [usize; 3], cross: CrossContexts) -> Self {
        let m: usize = counts.iter().sum();
        let c2 = 2 * m;
        let mut sb = b.sub(name);
        let intra = Band::ALL
            .iter()
            .map(|&band| IntraContext::new(&mut sb, &format!("intra_{}", band.short()), counts[band.index()], c2))
            .collect();
        let h2m = CrossContext::new(&mut sb, Band::High, Band::Mid, counts[0], c2);
        let h2l = CrossContext::new(&mut sb, Band::High, Band::Low, counts[0], c2);
        let m2l = CrossContext::new(&mut sb, Band::Mid, Band::Low, counts[1], c2);
        let nets = Band::ALL
            .iter()
            .map(|&band| {
                // own context + hyperprior + one slot per possible source band
                let slots = 2 + band.index();
                ParamNet::new(&mut sb, &format!("params_{}", band.short()), slots * c2, m, counts[band.index()])
            })
            .collect();
        ContextModel {
            ctx_channels: c2,
            counts,
            cross_contexts: cross,
            intra,
            h2m,
            h2l,
            m2l,
            nets,
        }
    }

    /// Cross-band context maps feeding band `dst`, in source order (high,
    /// then mid); disabled links give zero maps. `decoded` must hold every
    /// band above `dst`.
    pub fn cross<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        dst: Band,
        decoded: &Triple<Var<'t, T>>,
        dst_shape: &[usize],
    ) -> Result<Vec<Var<'t, T>>> {
        let mut out = Vec::new();
        for src in Band::ALL.iter().copied().filter(|s| s.index() < dst.index()) {
            let net = match (src, dst) {
                (Band::High, Band::Mid) => &self.h2m,
                (Band::High, Band::Low) => &self.h2l,
                _ => &self.m2l,
            };
            if self.cross_contexts.enabled(src, dst) {
                let x = decoded
                    .get(src)
                    .copied()
                    .ok_or_else(|| crate::Error::Shape(format!("{} band not decoded", src.name())))?;
                out.push(net.forward(tape, store, x, (dst_shape[2], dst_shape[3]))?);
            } else {
                out.push(tape.constant(Tensor::zeros(&[dst_shape[0], self.ctx_channels, dst_shape[2], dst_shape[3]])));
            }
        }
        Ok(out)
    }

    /// Entropy parameters of band `band` from its intra context, cross
    /// contexts and hyperprior.
    pub fn params<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        band: Band,
        intra: Var<'t, T>,
        cross: &[Var<'t, T>],
        psi: Var<'t, T>,
    ) -> Result<EntropyParams<'t, T>> {
        let s = intra.shape();
        let mut parts = vec![intra];
        parts.extend_from_slice(cross);
        parts.push(psi);
        for p in &parts {
            let ps = p.shape();
            if ps[0] != s[0] || ps[1] != self.ctx_channels || ps[2] != s[2] || ps[3] != s[3] {
                return shape_err(format!(
                    "{} entropy parameters: input {:?} does not match {}ch@{}x{}",
                    band.name(),
                    ps,
                    self.ctx_channels,
                    s[2],
                    s[3]
                ));
            }
        }
        if parts.len() != 2 + band.index() {
            return shape_err(format!("{} entropy parameters: wrong number of cross contexts", band.name()));
        }
        let (mu, sigma) = self.nets[band.index()].forward(tape, store, tape.cat_channels(&parts));
        Ok(EntropyParams { mu, sigma })
    }

    /// One-pass parameters for every position of `band` given the (fully
    /// known) latents: what training uses, and what staged decoding
    /// reproduces exactly since anchors only see zeros and non-anchors only
    /// see anchors.
    pub fn band_params<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        band: Band,
        y: &Triple<Var<'t, T>>,
        psi: Var<'t, T>,
    ) -> Result<EntropyParams<'t, T>> {
        let yb = *y.band(band);
        let shape = yb.shape();
        let intra = self.intra[band.index()].forward(tape, store, yb);
        let cross = self.cross(tape, store, band, y, &shape)?;
        self.params(tape, store, band, intra, &cross, psi)
    }
}
