use crate::context::CrossContexts;
use crate::error::{Error, Result};
use crate::freq::ChannelSplit;

/// The six rate points of the training recipe, in order of increasing quality.
pub const LAMBDAS: [f64; 6] = [0.0018, 0.0035, 0.0067, 0.013, 0.025, 0.0483];

/// Container value for a λ outside [`LAMBDAS`].
pub const LAMBDA_INDEX_CUSTOM: u8 = 0xFF;

pub fn lambda_index(lambda: f64) -> u8 {
    LAMBDAS
        .iter()
        .position(|&l| (l - lambda).abs() <= 1e-9 * l)
        .map_or(LAMBDA_INDEX_CUSTOM, |i| i as u8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Feature channels of the transforms.
    pub n: usize,
    /// Latent channels.
    pub m: usize,
    pub split: ChannelSplit,
    /// Stride-2 stages in the analysis transform.
    pub main_stages: usize,
    /// Stride-2 stages in each per-band hyper encoder.
    pub hyper_stages: usize,
    pub window: usize,
    /// Two fusion blocks in cascade (one otherwise).
    pub cascaded_fusion: bool,
    pub cross_contexts: CrossContexts,
    /// Learned per-element steps; `false` freezes every step at 1.
    pub adaptive_quant: bool,
    /// Largest accepted image side in pixels.
    pub max_side: u32,
}

impl ModelConfig {
    /// Full-size configuration (N = M = 192, four main stages, two hyper stages).
    pub fn full() -> Self {
        ModelConfig {
            n: 192,
            m: 192,
            split: ChannelSplit::new(1.0 / 3.0, 1.0 / 3.0).expect("valid split"),
            main_stages: 4,
            hyper_stages: 2,
            window: 8,
            cascaded_fusion: true,
            cross_contexts: CrossContexts::Full,
            adaptive_quant: true,
            max_side: 8192,
        }
    }

    /// Reduced configuration that trains in minutes on one CPU core.
    pub fn desk() -> Self {
        ModelConfig {
            n: 64,
            m: 96,
            main_stages: 3,
            hyper_stages: 1,
            window: 4,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 || self.m == 0 {
            return bad(format!("channel counts must be positive (N={}, M={})", self.n, self.m));
        }
        if self.main_stages < 2 {
            return bad(format!("main_stages must be at least 2, got {}", self.main_stages));
        }
        if self.hyper_stages < 1 {
            return bad(format!("hyper_stages must be at least 1, got {}", self.hyper_stages));
        }
        if self.window == 0 {
            return bad("window must be positive".into());
        }
        for (what, c) in [("N", self.n), ("M", self.m)] {
            if self.split.counts(c).contains(&0) {
                return bad(format!("split ({}, {}) leaves a band of {what}={c} empty", self.split.alpha, self.split.beta));
            }
        }
        if self.max_side == 0 {
            return bad("max_side must be positive".into());
        }
        Ok(())
    }

    pub fn n_counts(&self) -> [usize; 3] {
        self.split.counts(self.n)
    }

    pub fn m_counts(&self) -> [usize; 3] {
        self.split.counts(self.m)
    }

    /// Analysis stages placed before the fusion and first attention blocks.
    pub fn stages_before_fusion(&self) -> usize {
        self.main_stages.div_ceil(2)
    }

    /// Padded image sides must be multiples of this.
    pub fn pad_multiple(&self) -> usize {
        1 << (self.main_stages + self.hyper_stages + 2)
    }

    /// Canonical text form; also the checkpoint's config header.
    pub fn to_kv(&self) -> String {
        format!(
            "n={}\nm={}\nalpha={}\nbeta={}\nmain_stages={}\nhyper_stages={}\nwindow={}\ncascaded_fusion={}\ncross_contexts={}\nadaptive_quant={}\nmax_side={}\n",
            self.n,
            self.m,
            self.split.alpha,
            self.split.beta,
            self.main_stages,
            self.hyper_stages,
            self.window,
            self.cascaded_fusion,
            self.cross_contexts.id(),
            self.adaptive_quant,
            self.max_side
        )
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad_value = || Error::Config(format!("invalid value {v:?} for {key}"));
        let perr = |_: std::num::ParseIntError| bad_value();
        match key.trim() {
            "n" => self.n = v.parse().map_err(perr)?,
            "m" => self.m = v.parse().map_err(perr)?,
            "alpha" => self.split = ChannelSplit::new(v.parse().map_err(|_| bad_value())?, self.split.beta)?,
            "beta" => self.split = ChannelSplit::new(self.split.alpha, v.parse().map_err(|_| bad_value())?)?,
            "main_stages" => self.main_stages = v.parse().map_err(perr)?,
            "hyper_stages" => self.hyper_stages = v.parse().map_err(perr)?,
            "window" => self.window = v.parse().map_err(perr)?,
            "cascaded_fusion" => self.cascaded_fusion = v.parse().map_err(|_| bad_value())?,
            "cross_contexts" => {
                self.cross_contexts = v
                    .parse::<u8>()
                    .ok()
                    .and_then(CrossContexts::from_id)
                    .ok_or_else(bad_value)?
            }
            "adaptive_quant" => self.adaptive_quant = v.parse().map_err(|_| bad_value())?,
            "max_side" => self.max_side = v.parse().map_err(perr)?,
            other => return Err(Error::Config(format!("unknown model key {other:?}"))),
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::full();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// One-byte architecture identifier written into containers: 1 for the
    /// desk preset, 2 for the full preset, otherwise a hash of the
    /// configuration in 3..=255. `max_side` does not take part.
    pub fn config_id(&self) -> u8 {
        let arch = |c: &ModelConfig| ModelConfig { max_side: 0, ..c.clone() };
        let me = arch(self);
        if me == arch(&Self::desk()) {
            return 1;
        }
        if me == arch(&Self::full()) {
            return 2;
        }
        let mut h: u32 = 0x811c_9dc5;
        for b in me.to_kv().bytes() {
            h = (h ^ b as u32).wrapping_mul(0x0100_0193);
        }
        3 + (h % 253) as u8
    }
}
