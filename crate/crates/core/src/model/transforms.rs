use crate::error::Result;
use crate::freq::{Band, Triple};
use crate::freq_blocks::{MoConv, Mtorb};
use crate::fusion::{Ctsfrb, Wam};
use crate::nn::{Conv2d, ConvTranspose2d, Gdn, LEAKY_SLOPE};
use crate::params::{Builder, ParamStore};
use crate::tensor::{ConvGeom, Float, Tape, Var};

use super::ModelConfig;

/// Per-band fusion and attention applied between stages.
#[derive(Clone, Debug)]
pub struct BandRefine {
    pub fusion: Option<Vec<Ctsfrb>>,
    pub attention: Vec<Wam>,
}

impl BandRefine {
    fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, counts: [usize; 3], cfg: &ModelConfig, fusion: bool) -> Self {
        let mut sb = b.sub(name);
        let fusion = fusion.then(|| {
            Band::ALL
                .iter()
                .map(|&band| {
                    Ctsfrb::new(&mut sb, &format!("fusion_{}", band.short()), counts[band.index()], cfg.cascaded_fusion)
                })
                .collect()
        });
        let attention = Band::ALL
            .iter()
            .map(|&band| Wam::new(&mut sb, &format!("attn_{}", band.short()), counts[band.index()], cfg.window))
            .collect();
        BandRefine { fusion, attention }
    }

    fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Triple<Var<'t, T>>,
    ) -> Result<Triple<Var<'t, T>>> {
        x.try_map(|band, &v| {
            let i = band.index();
            let v = match &self.fusion {
                Some(f) => f[i].forward(tape, store, v)?,
                None => v,
            };
            self.attention[i].forward(tape, store, v)
        })
    }
}

fn gdn_triple<T: Float>(b: &mut Builder<'_, T>, name: &str, counts: [usize; 3], inverse: bool) -> Vec<Gdn> {
    let mut sb = b.sub(name);
    Band::ALL
        .iter()
        .map(|&band| Gdn::new(&mut sb, band.name(), counts[band.index()], inverse))
        .collect()
}

fn apply_gdn<'t, T: Float>(
    g: &[Gdn],
    tape: &'t Tape<T>,
    store: &ParamStore<T>,
    x: Triple<Var<'t, T>>,
) -> Triple<Var<'t, T>> {
    x.map(|band, &v| g[band.index()].forward(tape, store, v))
}

/// Main encoder: image → three-band latent.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub input: MoConv,
    pub stages: Vec<Mtorb>,
    pub norms: Vec<Option<Vec<Gdn>>>,
    pub mid: BandRefine,
    pub tail: BandRefine,
    pub output: MoConv,
    pub fusion_after: usize,
}

impl Analysis {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, cfg: &ModelConfig) -> Self {
        let mut sb = b.sub("g_a");
        let nc = cfg.n_counts();
        let input = MoConv::new(&mut sb, "input", [3, 0, 0], nc, 3);
        let s = cfg.main_stages;
        let mut stages = Vec::new();
        let mut norms = Vec::new();
        for i in 0..s {
            stages.push(Mtorb::down(&mut sb, &format!("stage{i}"), nc, nc));
            norms.push((i + 1 < s).then(|| gdn_triple(&mut sb, &format!("gdn{i}"), nc, false)));
        }
        let mid = BandRefine::new(&mut sb, "mid", nc, cfg, true);
        let tail = BandRefine::new(&mut sb, "tail", nc, cfg, false);
        let output = MoConv::new(&mut sb, "output", nc, cfg.m_counts(), 3);
        Analysis {
            input,
            stages,
            norms,
            mid,
            tail,
            output,
            fusion_after: cfg.stages_before_fusion(),
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Result<Triple<Var<'t, T>>> {
        let mut h = self.input.forward(tape, store, &Triple::high_only(x))?;
        for (i, (stage, norm)) in self.stages.iter().zip(&self.norms).enumerate() {
            h = stage.forward(tape, store, &h)?;
            if let Some(g) = norm {
                h = apply_gdn(g, tape, store, h);
            }
            if i + 1 == self.fusion_after {
                h = self.mid.forward(tape, store, h)?;
            }
        }
        h = self.tail.forward(tape, store, h)?;
        self.output.forward(tape, store, &h)
    }
}

/// Initial bias of the image-producing term (mid-gray output at zero input).
pub const OUTPUT_BIAS: f64 = 0.5;

/// Main decoder: three-band latent → image (unclamped).
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub input: MoConv,
    pub head: BandRefine,
    pub mid: BandRefine,
    pub stages: Vec<Mtorb>,
    pub norms: Vec<Option<Vec<Gdn>>>,
    pub output: MoConv,
    pub fusion_after: usize,
}

impl Synthesis {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, cfg: &ModelConfig) -> Self {
        let mut sb = b.sub("g_s");
        let nc = cfg.n_counts();
        let input = MoConv::new(&mut sb, "input", cfg.m_counts(), nc, 3);
        let head = BandRefine::new(&mut sb, "head", nc, cfg, false);
        let mid = BandRefine::new(&mut sb, "mid", nc, cfg, true);
        let s = cfg.main_stages;
        let mut stages = Vec::new();
        let mut norms = Vec::new();
        for i in 0..s {
            stages.push(Mtorb::up(&mut sb, &format!("stage{i}"), nc, nc));
            norms.push((i + 1 < s).then(|| gdn_triple(&mut sb, &format!("igdn{i}"), nc, true)));
        }
        let output = MoConv::new(&mut sb, "output", nc, [3, 0, 0], 3);
        let bias = output
            .term(Band::High, Band::High)
            .and_then(|r| r.bias())
            .expect("intra term carries the output bias");
        sb.store_mut().get_mut(bias).data_mut().fill(T::of(OUTPUT_BIAS));
        Synthesis {
            input,
            head,
            mid,
            stages,
            norms,
            output,
            fusion_after: s - cfg.stages_before_fusion(),
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        y: &Triple<Var<'t, T>>,
    ) -> Result<Var<'t, T>> {
        let mut h = self.input.forward(tape, store, y)?;
        h = self.head.forward(tape, store, h)?;
        for (i, (stage, norm)) in self.stages.iter().zip(&self.norms).enumerate() {
            if i == self.fusion_after {
                h = self.mid.forward(tape, store, h)?;
            }
            h = stage.forward(tape, store, &h)?;
            if let Some(g) = norm {
                h = apply_gdn(g, tape, store, h);
            }
        }
        let out = self.output.forward(tape, store, &h)?;
        Ok(*out.band(Band::High))
    }
}

/// Per-band hyper encoder `z = h_a(|y|)` and decoder `Ψ = h_s(ẑ)`.
#[derive(Clone, Debug)]
pub struct HyperCodec {
    pub enc_in: Conv2d,
    pub enc_down: Vec<Conv2d>,
    pub dec_up: Vec<ConvTranspose2d>,
    pub dec_out: Conv2d,
}

fn down_geom() -> ConvGeom {
    ConvGeom::new(5, 2, 2)
}

impl HyperCodec {
    /// `c` latent channels of the band, `hidden` decoder width, `psi`
    /// hyperprior channels.
    pub fn new<T: Float>(b: &mut Builder<'_, T>, band: Band, c: usize, hidden: usize, psi: usize, stages: usize) -> Self {
        let mut ea = b.sub("h_a");
        let mut ea = ea.sub(band.name());
        let enc_in = Conv2d::new(&mut ea, "conv_in", c, c, ConvGeom::same(3), true);
        let enc_down = (0..stages)
            .map(|i| Conv2d::new(&mut ea, &format!("down{i}"), c, c, down_geom(), true))
            .collect();
        drop(ea);
        let mut ds = b.sub("h_s");
        let mut ds = ds.sub(band.name());
        let dec_up = (0..stages)
            .map(|i| ConvTranspose2d::new(&mut ds, &format!("up{i}"), if i == 0 { c } else { hidden }, hidden, down_geom(), true))
            .collect();
        let dec_out = Conv2d::new(&mut ds, "conv_out", hidden, psi, ConvGeom::same(3), true);
        HyperCodec {
            enc_in,
            enc_down,
            dec_up,
            dec_out,
        }
    }

    pub fn encode<'t, T: Float>(&self, tape: &'t Tape<T>, store: &ParamStore<T>, y: Var<'t, T>) -> Var<'t, T> {
        let slope = T::of(LEAKY_SLOPE);
        let mut h = self.enc_in.forward(tape, store, y.abs());
        for conv in &self.enc_down {
            h = conv.forward(tape, store, h.leaky_relu(slope));
        }
        h
    }

    pub fn decode<'t, T: Float>(&self, tape: &'t Tape<T>, store: &ParamStore<T>, z: Var<'t, T>) -> Var<'t, T> {
        let slope = T::of(LEAKY_SLOPE);
        let mut h = z;
        for up in &self.dec_up {
            h = up.forward(tape, store, h).leaky_relu(slope);
        }
        self.dec_out.forward(tape, store, h)
    }
}
