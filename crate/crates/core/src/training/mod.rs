//! Rate-distortion training: loss, Adam, data pipeline and the epoch loop.

mod adam;
mod loss;
mod synth;

pub use adam::{grad_norm, Adam};
pub use loss::{rd_loss, RdLoss, DISTORTION_SCALE, RATE_TERMS};
pub use synth::{synth_dataset, synth_sc_patch};

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::freq::Band;
use crate::image_io::{crop_at, pad_replicate};
use crate::model::{Model, Quantizer, LAMBDAS};
use crate::tensor::{Tape, Tensor};

/// Distortion measure of the loss. Only MSE is trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distortion {
    Mse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub lr: f64,
    /// Learning rate from `lr_switch_epoch` on.
    pub lr_final: f64,
    pub lr_switch_epoch: usize,
    pub epochs: usize,
    pub batch: usize,
    pub crop: usize,
    pub seed: u64,
    pub distortion: Distortion,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Consecutive non-finite steps tolerated before aborting.
    pub max_bad_steps: usize,
}

impl TrainConfig {
    /// Full recipe: 400 epochs of batch-8 256² crops, 1e-4 then 1e-5 after epoch 300.
    pub fn full(lambda: f64) -> Self {
        TrainConfig {
            lambda,
            lr: 1e-4,
            lr_final: 1e-5,
            lr_switch_epoch: 300,
            epochs: 400,
            batch: 8,
            crop: 256,
            seed: 0,
            distortion: Distortion::Mse,
            clip_norm: 1.0,
            max_bad_steps: 20,
        }
    }

    /// Minutes-scale recipe for the desk model on 64 synthetic images.
    pub fn desk(lambda: f64) -> Self {
        TrainConfig {
            lr: 1e-3,
            lr_final: 2e-4,
            lr_switch_epoch: 15,
            epochs: 20,
            batch: 2,
            crop: 128,
            ..Self::full(lambda)
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= self.lr_switch_epoch {
            self.lr_final
        } else {
            self.lr
        }
    }

    /// `λ` must be one of the six rate points.
    pub fn check_lambda(&self) -> Result<()> {
        if LAMBDAS.iter().any(|&l| (l - self.lambda).abs() <= 1e-9 * l) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "lambda {} is not one of {}",
                self.lambda,
                LAMBDAS.map(|l| l.to_string()).join(", ")
            )))
        }
    }

    pub fn validate(&self, pad_multiple: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.epochs == 0 || self.batch == 0 {
            return bad("epochs and batch must be positive".into());
        }
        if self.crop == 0 || self.crop % pad_multiple != 0 {
            return bad(format!("crop {} is not a multiple of {pad_multiple}", self.crop));
        }
        if !(self.lr > 0.0 && self.lr_final > 0.0) {
            return bad("learning rates must be positive".into());
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "lambda={}\nlr={}\nlr_final={}\nlr_switch_epoch={}\nepochs={}\nbatch={}\ncrop={}\nseed={}\ndistortion=mse\nclip_norm={}\nmax_bad_steps={}\n",
            self.lambda,
            self.lr,
            self.lr_final,
            self.lr_switch_epoch,
            self.epochs,
            self.batch,
            self.crop,
            self.seed,
            self.clip_norm,
            self.max_bad_steps
        )
    }

    /// Set one key; `Ok(false)` when the key is not a training key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let v = value.trim();
        let perr = |e: &dyn std::fmt::Display| Error::Config(format!("{key}={v}: {e}"));
        match key.trim() {
            "lambda" => self.lambda = v.parse().map_err(|e| perr(&e))?,
            "lr" => self.lr = v.parse().map_err(|e| perr(&e))?,
            "lr_final" => self.lr_final = v.parse().map_err(|e| perr(&e))?,
            "lr_switch_epoch" => self.lr_switch_epoch = v.parse().map_err(|e| perr(&e))?,
            "epochs" => self.epochs = v.parse().map_err(|e| perr(&e))?,
            "batch" => self.batch = v.parse().map_err(|e| perr(&e))?,
            "crop" => self.crop = v.parse().map_err(|e| perr(&e))?,
            "seed" => self.seed = v.parse().map_err(|e| perr(&e))?,
            "clip_norm" => self.clip_norm = v.parse().map_err(|e| perr(&e))?,
            "max_bad_steps" => self.max_bad_steps = v.parse().map_err(|e| perr(&e))?,
            "distortion" => {
                if !v.eq_ignore_ascii_case("mse") {
                    return Err(perr(&"only mse is supported"));
                }
                self.distortion = Distortion::Mse;
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Uniformly placed `size`×`size` window; smaller images are replicate
/// padded first.
pub fn crop_patches<R: Rng>(img: &Tensor<f32>, size: usize, rng: &mut R) -> Tensor<f32> {
    let (_, _, h, w) = img.dims4();
    let padded;
    let src = if h < size || w < size {
        padded = pad_replicate(img, h.max(size), w.max(size));
        &padded
    } else {
        img
    };
    let (_, _, h, w) = src.dims4();
    let top = rng.gen_range(0..=h - size);
    let left = rng.gen_range(0..=w - size);
    crop_at(src, top, left, size, size)
}

/// Stack `[1, c, h, w]` images into `[n, c, h, w]`.
pub fn stack(images: &[Tensor<f32>]) -> Tensor<f32> {
    let (_, c, h, w) = images[0].dims4();
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for im in images {
        assert_eq!(im.shape(), &[1, c, h, w], "batch images differ in shape");
        data.extend_from_slice(im.data());
    }
    Tensor::new(&[images.len(), c, h, w], data)
}

/// Per-epoch averages over the optimizer steps that were taken.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    /// `255²·MSE`.
    pub distortion: f64,
    pub bpp: f64,
    /// zH, zM, zL, yH, yM, yL.
    pub rates: [f64; 6],
    /// Mean step size of the high, mid and low bands.
    pub mean_delta: [f64; 3],
    pub lr: f64,
    pub steps: usize,
    pub skipped: usize,
}

pub const CSV_HEADER: &str = "epoch,L,D_mse,R_bpp,R_yH,R_yM,R_yL,R_zH,R_zM,R_zL,meanDelta_H,meanDelta_M,meanDelta_L,lr";

impl EpochStats {
    pub fn csv_row(&self) -> String {
        let r = &self.rates;
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:e}",
            self.epoch,
            self.loss,
            self.distortion,
            self.bpp,
            r[3],
            r[4],
            r[5],
            r[0],
            r[1],
            r[2],
            self.mean_delta[0],
            self.mean_delta[1],
            self.mean_delta[2],
            self.lr
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Loss of every step taken, in order.
    pub step_losses: Vec<f64>,
    pub skipped_steps: usize,
}

/// One optimizer step's measurements.
pub struct StepResult {
    pub loss: f64,
    pub distortion: f64,
    pub bpp: f64,
    pub rates: [f64; 6],
    pub mean_delta: [f64; 3],
    pub grad_norm: f64,
}

/// Forward, backward, clip and update on one batch. A non-finite loss or
/// gradient leaves the weights untouched and returns the error.
pub fn train_step(model: &mut Model, opt: &mut Adam, batch: &Tensor<f32>, lambda: f64, lr: f64, clip: f64, noise: &mut ChaCha8Rng) -> Result<StepResult> {
    let tape = Tape::new();
    let x = tape.constant(batch.clone());
    let fwd = model.net.forward(&tape, &model.store, x, Quantizer::Noise(noise))?;
    let loss = rd_loss(x, &fwd, lambda)?;
    let mean_delta = Band::ALL.map(|b| fwd.delta.band(b).value().mean() as f64);
    let measured = (loss.value(), loss.distortion, loss.bpp, loss.rates);
    let grads = tape.backward(loss.total);
    let norm = grad_norm(&grads);
    if !norm.is_finite() {
        return Err(Error::NonFinite { term: "gradient".into() });
    }
    let scale = if norm > clip { clip / norm } else { 1.0 };
    opt.update(&mut model.store, &grads, lr, scale);
    model.invalidate();
    Ok(StepResult {
        loss: measured.0,
        distortion: measured.1,
        bpp: measured.2,
        rates: measured.3,
        mean_delta,
        grad_norm: norm,
    })
}

/// Train `model` on `dataset` (`[1, 3, h, w]` images) and finalize it.
/// Writes one CSV row per epoch to `log` when given.
pub fn train_loop(model: &mut Model, dataset: &[Tensor<f32>], cfg: &TrainConfig, mut log: Option<&mut dyn Write>) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    cfg.validate(model.config().pad_multiple())?;
    model.lambda = cfg.lambda;
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6E6F_6973_6521);
    let mut opt = Adam::new(model.store.len());
    let mut report = TrainReport::default();
    if let Some(w) = log.as_mut() {
        writeln!(w, "{CSV_HEADER}")?;
    }
    let mut bad_run = 0;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut data_rng);
        let mut acc = EpochStats {
            epoch: epoch + 1,
            loss: 0.0,
            distortion: 0.0,
            bpp: 0.0,
            rates: [0.0; 6],
            mean_delta: [0.0; 3],
            lr,
            steps: 0,
            skipped: 0,
        };
        for chunk in order.chunks(cfg.batch) {
            let patches: Vec<_> = chunk.iter().map(|&i| crop_patches(&dataset[i], cfg.crop, &mut data_rng)).collect();
            let batch = stack(&patches);
            match train_step(model, &mut opt, &batch, cfg.lambda, lr, cfg.clip_norm, &mut noise_rng) {
                Ok(s) => {
                    bad_run = 0;
                    report.step_losses.push(s.loss);
                    acc.steps += 1;
                    acc.loss += s.loss;
                    acc.distortion += s.distortion;
                    acc.bpp += s.bpp;
                    for i in 0..6 {
                        acc.rates[i] += s.rates[i];
                    }
                    for i in 0..3 {
                        acc.mean_delta[i] += s.mean_delta[i];
                    }
                    log::debug!("epoch {} step {} loss {:.4} |g| {:.3}", epoch + 1, report.step_losses.len(), s.loss, s.grad_norm);
                }
                Err(Error::NonFinite { term }) => {
                    bad_run += 1;
                    acc.skipped += 1;
                    report.skipped_steps += 1;
                    log::warn!("epoch {}: non-finite {term}, step skipped", epoch + 1);
                    if bad_run >= cfg.max_bad_steps {
                        return Err(Error::NonFinite {
                            term: format!("{term} in {bad_run} consecutive steps"),
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        if acc.steps > 0 {
            let n = acc.steps as f64;
            acc.loss /= n;
            acc.distortion /= n;
            acc.bpp /= n;
            acc.rates.iter_mut().for_each(|r| *r /= n);
            acc.mean_delta.iter_mut().for_each(|d| *d /= n);
        }
        log::info!("epoch {}: L {:.4} D {:.2} R {:.4} bpp", acc.epoch, acc.loss, acc.distortion, acc.bpp);
        if let Some(w) = log.as_mut() {
            writeln!(w, "{}", acc.csv_row())?;
        }
        report.epochs.push(acc);
    }
    model.finalize();
    Ok(report)
}
