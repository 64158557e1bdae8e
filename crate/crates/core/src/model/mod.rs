//! The assembled codec network: analysis/synthesis transforms, per-band
//! hyperprior, step-size heads, factorized priors and context model.

mod checkpoint;
mod config;
mod transforms;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{lambda_index, ModelConfig, LAMBDAS, LAMBDA_INDEX_CUSTOM};
pub use transforms::{Analysis, BandRefine, HyperCodec, Synthesis, OUTPUT_BIAS};

use rand_chacha::ChaCha8Rng;

use crate::adaptive_quant::{quantize_test, quantize_train, DeltaHead};
use crate::context::ContextModel;
use crate::entropy::{gaussian_uniform_likelihood, rate_bits, CdfRow, FactorizedModel};
use crate::error::{shape_err, Error, Result};
use crate::freq::{Band, Triple};
use crate::params::{init_rng, Builder, ParamStore};
use crate::tensor::{Float, Tape, Tensor, Var};

/// Module descriptors; parameter values live in a separate [`ParamStore`]
/// so one network serves both f32 and f64 stores.
#[derive(Clone, Debug)]
pub struct Network {
    pub cfg: ModelConfig,
    pub g_a: Analysis,
    pub g_s: Synthesis,
    pub hyper: Vec<HyperCodec>,
    pub priors: Vec<FactorizedModel>,
    pub heads: Vec<DeltaHead>,
    pub context: ContextModel,
}

/// How latents are quantized in a forward pass.
pub enum Quantizer<'a> {
    /// Additive uniform noise (training).
    Noise(&'a mut ChaCha8Rng),
    /// Rounding to the step grid (coding).
    Round,
}

/// Everything a forward pass produces.
pub struct Forward<'t, T: Float> {
    /// Reconstruction clamped to `[0, 1]`.
    pub x_hat: Var<'t, T>,
    pub y: Triple<Var<'t, T>>,
    pub y_q: Triple<Var<'t, T>>,
    pub z: Triple<Var<'t, T>>,
    pub z_q: Triple<Var<'t, T>>,
    pub psi: Triple<Var<'t, T>>,
    pub delta: Triple<Var<'t, T>>,
    pub mu: Triple<Var<'t, T>>,
    pub sigma: Triple<Var<'t, T>>,
    pub lik_y: Triple<Var<'t, T>>,
    pub lik_z: Triple<Var<'t, T>>,
}

impl<'t, T: Float> Forward<'t, T> {
    /// Bits of the y and z parts of each band.
    pub fn band_bits(&self) -> (Triple<Var<'t, T>>, Triple<Var<'t, T>>) {
        (
            self.lik_y.map(|_, &p| rate_bits(p)),
            self.lik_z.map(|_, &p| rate_bits(p)),
        )
    }
}

impl Network {
    pub fn build<T: Float>(cfg: &ModelConfig, b: &mut Builder<'_, T>) -> Result<Self> {
        cfg.validate()?;
        let mc = cfg.m_counts();
        let g_a = Analysis::new(b, cfg);
        let g_s = Synthesis::new(b, cfg);
        let psi = 2 * cfg.m;
        let hyper = Band::ALL
            .iter()
            .map(|&band| HyperCodec::new(b, band, mc[band.index()], cfg.m, psi, cfg.hyper_stages))
            .collect();
        let priors = {
            let mut sb = b.sub("z_prior");
            Band::ALL
                .iter()
                .map(|&band| FactorizedModel::new(&mut sb, band.name(), mc[band.index()]))
                .collect()
        };
        let heads = {
            let mut sb = b.sub("delta");
            Band::ALL
                .iter()
                .map(|&band| {
                    let c = mc[band.index()];
                    if cfg.adaptive_quant {
                        DeltaHead::new(&mut sb, band.name(), psi, cfg.m, c)
                    } else {
                        DeltaHead::frozen(c)
                    }
                })
                .collect()
        };
        let context = ContextModel::new(b, "ctx", mc, cfg.cross_contexts);
        Ok(Network {
            cfg: cfg.clone(),
            g_a,
            g_s,
            hyper,
            priors,
            heads,
            context,
        })
    }

    /// Check that `x` is a padded `[n, 3, h, w]` image batch.
    pub fn check_input(&self, shape: &[usize]) -> Result<()> {
        let p = self.cfg.pad_multiple();
        if shape.len() != 4 || shape[1] != 3 {
            return shape_err(format!("expected [n, 3, h, w] image, got {shape:?}"));
        }
        if shape[2] == 0 || shape[3] == 0 || shape[2] % p != 0 || shape[3] % p != 0 {
            return shape_err(format!(
                "image {}x{} is not padded to a multiple of {p}",
                shape[3], shape[2]
            ));
        }
        Ok(())
    }

    pub fn analysis<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Result<Triple<Var<'t, T>>> {
        self.check_input(&x.shape())?;
        self.g_a.forward(tape, store, x)
    }

    /// Reconstruction, before clamping.
    pub fn synthesis<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        y: &Triple<Var<'t, T>>,
    ) -> Result<Var<'t, T>> {
        self.g_s.forward(tape, store, y)
    }

    pub fn hyper_analysis<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        y: &Triple<Var<'t, T>>,
    ) -> Result<Triple<Var<'t, T>>> {
        crate::freq::check_triple(y, self.cfg.m_counts())?;
        Ok(y.map(|band, &v| self.hyper[band.index()].encode(tape, store, v)))
    }

    pub fn hyper_synthesis<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        z: &Triple<Var<'t, T>>,
    ) -> Triple<Var<'t, T>> {
        z.map(|band, &v| self.hyper[band.index()].decode(tape, store, v))
    }

    pub fn deltas<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        psi: &Triple<Var<'t, T>>,
    ) -> Triple<Var<'t, T>> {
        psi.map(|band, &v| self.heads[band.index()].forward(tape, store, v))
    }

    /// Full pass: image → latents → likelihoods and reconstruction.
    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
        quant: Quantizer<'_>,
    ) -> Result<Forward<'t, T>> {
        let y = self.analysis(tape, store, x)?;
        let z = self.hyper_analysis(tape, store, &y)?;
        let train = matches!(quant, Quantizer::Noise(_));
        let mut rng = match quant {
            Quantizer::Noise(r) => Some(r),
            Quantizer::Round => None,
        };
        let z_q = z.map(|_, &v| match rng.as_mut() {
            Some(r) => quantize_train(v, tape.constant(Tensor::full(&v.shape(), T::one())), *r),
            None => tape.constant(v.value().map(|e| e.round())),
        });
        let lik_z = z_q.map(|band, &v| self.priors[band.index()].likelihood(tape, store, v));
        let psi = self.hyper_synthesis(tape, store, &z_q);
        let delta = self.deltas(tape, store, &psi);
        let mut y_q = Triple::default();
        for band in Band::ALL {
            let (yb, db) = (*y.band(band), *delta.band(band));
            let q = match rng.as_mut() {
                Some(r) => quantize_train(yb, db, *r),
                None => tape.constant(quantize_test(&yb.value(), &db.value()).1),
            };
            y_q.set(band, Some(q));
        }
        let mut mu = Triple::default();
        let mut sigma = Triple::default();
        let mut lik_y = Triple::default();
        for band in Band::ALL {
            let p = self.context.band_params(tape, store, band, &y_q, *psi.band(band))?;
            let lik = gaussian_uniform_likelihood(*y_q.band(band), p.mu, p.sigma, *delta.band(band));
            mu.set(band, Some(p.mu));
            sigma.set(band, Some(p.sigma));
            lik_y.set(band, Some(lik));
        }
        let raw = self.synthesis(tape, store, &y_q)?;
        let (lo, hi) = (T::zero(), T::one());
        let x_hat = if train {
            raw.clamp_pass_through(lo, hi)
        } else {
            raw.clamp(lo, hi)
        };
        Ok(Forward {
            x_hat,
            y,
            y_q,
            z,
            z_q,
            psi,
            delta,
            mu,
            sigma,
            lik_y,
            lik_z,
        })
    }
}

/// Network plus its single-precision weights, the λ it was trained for and
/// (once finalized) the coding tables of the hyper latents.
#[derive(Clone, Debug)]
pub struct Model {
    pub net: Network,
    pub store: ParamStore<f32>,
    pub lambda: f64,
    z_rows: Option<Vec<Vec<CdfRow>>>,
}

impl Model {
    /// Freshly initialized weights from `seed`.
    pub fn new(cfg: &ModelConfig, seed: u64, lambda: f64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut rng = init_rng(seed);
        let net = Network::build(cfg, &mut Builder::new(&mut store, &mut rng))?;
        Ok(Model {
            net,
            store,
            lambda,
            z_rows: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.cfg
    }

    pub fn config_id(&self) -> u8 {
        self.net.cfg.config_id()
    }

    pub fn lambda_index(&self) -> u8 {
        lambda_index(self.lambda)
    }

    /// Tabulate the hyper-latent coding tables from the current weights.
    pub fn finalize(&mut self) {
        self.z_rows = Some(self.net.priors.iter().map(|p| p.cdf_rows(&self.store)).collect());
    }

    /// Drop the coding tables (weights are about to change).
    pub fn invalidate(&mut self) {
        self.z_rows = None;
    }

    pub fn is_finalized(&self) -> bool {
        self.z_rows.is_some()
    }

    pub fn z_rows(&self, band: Band) -> Result<&[CdfRow]> {
        self.z_rows
            .as_ref()
            .map(|r| r[band.index()].as_slice())
            .ok_or(Error::NotFinalized)
    }

    /// Quantized (coding-path) forward pass on a padded image batch; used
    /// as the reference the bitstream must reproduce.
    pub fn forward_quantized(&self, x: &Tensor<f32>) -> Result<QuantizedPass> {
        let tape = Tape::inference();
        let f = self.net.forward(&tape, &self.store, tape.constant(x.clone()), Quantizer::Round)?;
        let (ybits, zbits) = f.band_bits();
        let symbols = Band::ALL.map(|b| {
            let delta = f.delta.band(b).value();
            quantize_test(&f.y.band(b).value(), &delta).0
        });
        Ok(QuantizedPass {
            x_hat: (*f.x_hat.value()).clone(),
            y_hat: f.y_q.values(),
            z_hat: f.z_q.values(),
            delta: f.delta.values(),
            y_symbols: symbols,
            y_bits: Band::ALL.map(|b| ybits.band(b).item().f64()),
            z_bits: Band::ALL.map(|b| zbits.band(b).item().f64()),
        })
    }
}

/// Values of a coding-path forward pass.
#[derive(Clone, Debug)]
pub struct QuantizedPass {
    pub x_hat: Tensor<f32>,
    pub y_hat: Triple<Tensor<f32>>,
    pub z_hat: Triple<Tensor<f32>>,
    pub delta: Triple<Tensor<f32>>,
    pub y_symbols: [Vec<i32>; 3],
    /// Estimated bits (`Σ −log2 p`) per band.
    pub y_bits: [f64; 3],
    pub z_bits: [f64; 3],
}

impl QuantizedPass {
    pub fn estimated_bits(&self) -> f64 {
        self.y_bits.iter().chain(&self.z_bits).sum()
    }
}
