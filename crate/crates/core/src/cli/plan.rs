//! Assembling a training run from preset, config file and flags.

use std::path::PathBuf;

use fdsc::model::{ModelConfig, LAMBDAS};
use fdsc::training::TrainConfig;

use super::{CliError, TrainArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Full,
}

impl Preset {
    fn parse(v: &str) -> Result<Self, CliError> {
        match v.trim() {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(CliError::Usage(format!("preset must be desk or full, got {other:?}"))),
        }
    }
}

/// Default λ when none is given: the highest-quality rate point.
const DEFAULT_LAMBDA: f64 = 0.0483;

#[derive(Debug)]
pub struct TrainPlan {
    pub preset: Preset,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
    pub synth_images: usize,
    pub synth_size: usize,
    pub synth_seed: Option<u64>,
}

fn split_kv(line: &str) -> Result<(&str, &str), CliError> {
    line.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Usage(format!("expected key=value, got {line:?}")))
}

fn usage(e: fdsc::Error) -> CliError {
    CliError::Usage(e.to_string())
}

impl TrainPlan {
    /// Order: preset, config-file keys, `--set` overrides, dedicated flags.
    pub fn build(args: &TrainArgs, file: Option<&str>) -> Result<Self, CliError> {
        let entries: Vec<(String, String)> = file
            .into_iter()
            .flat_map(str::lines)
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .chain(args.overrides.iter().map(String::as_str))
            .map(|l| split_kv(l).map(|(k, v)| (k.to_string(), v.to_string())))
            .collect::<Result<_, _>>()?;

        let from_flags = match (args.desk, args.full) {
            (true, false) => Some(Preset::Desk),
            (false, true) => Some(Preset::Full),
            _ => None,
        };
        let mut from_keys = None;
        for (k, v) in &entries {
            if k == "preset" {
                from_keys = Some(Preset::parse(v)?);
            }
        }
        let preset = match (from_flags, from_keys) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Usage(format!("--{} conflicts with preset={}", name(a), name(b))))
            }
            (Some(p), _) | (None, Some(p)) => p,
            (None, None) if file.is_some() => Preset::Full,
            (None, None) => {
                return Err(CliError::Usage("no configuration: pass --config FILE, --desk or --full".into()))
            }
        };

        let (model, train) = match preset {
            Preset::Desk => (ModelConfig::desk(), TrainConfig::desk(DEFAULT_LAMBDA)),
            Preset::Full => (ModelConfig::full(), TrainConfig::full(DEFAULT_LAMBDA)),
        };
        let mut plan = TrainPlan {
            preset,
            model,
            train,
            data: None,
            synth_images: 64,
            synth_size: 256,
            synth_seed: None,
        };
        for (k, v) in &entries {
            plan.set(k, v)?;
        }
        if let Some(l) = args.lambda {
            plan.train.lambda = l;
        }
        if let Some(e) = args.epochs {
            plan.train.epochs = e;
        }
        if let Some(s) = args.seed {
            plan.train.seed = s;
        }
        if let Some(d) = &args.data {
            plan.data = Some(d.clone());
        }
        plan.check()?;
        Ok(plan)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let num = |v: &str| {
            v.parse::<usize>()
                .map_err(|e| CliError::Usage(format!("{key}={v}: {e}")))
        };
        match key {
            "preset" => {}
            "data" => self.data = Some(PathBuf::from(value)),
            "synth_images" => self.synth_images = num(value)?,
            "synth_size" => self.synth_size = num(value)?,
            "synth_seed" => self.synth_seed = Some(num(value)? as u64),
            _ => {
                if !self.train.set(key, value).map_err(usage)? {
                    self.model.set(key, value).map_err(usage)?;
                }
            }
        }
        Ok(())
    }

    fn check(&self) -> Result<(), CliError> {
        self.model.validate().map_err(usage)?;
        if self.preset == Preset::Full {
            self.train.check_lambda().map_err(|_| {
                CliError::Usage(format!(
                    "lambda {} is not valid for the full preset; choose one of {}",
                    self.train.lambda,
                    LAMBDAS.map(|l| l.to_string()).join(", ")
                ))
            })?;
        }
        self.train.validate(self.model.pad_multiple()).map_err(usage)?;
        if self.data.is_none() && (self.synth_images == 0 || self.synth_size == 0) {
            return Err(CliError::Usage("synth_images and synth_size must be positive".into()));
        }
        Ok(())
    }

    /// Everything that determines the run, as flat text.
    pub fn to_kv(&self) -> String {
        let mut s = format!("preset={}\n", name(self.preset));
        match &self.data {
            Some(d) => s += &format!("data={}\n", d.display()),
            None => {
                s += &format!(
                    "synth_images={}\nsynth_size={}\nsynth_seed={}\n",
                    self.synth_images,
                    self.synth_size,
                    self.synth_seed.unwrap_or(self.train.seed)
                )
            }
        }
        s + &self.train.to_kv() + &self.model.to_kv()
    }
}

fn name(p: Preset) -> &'static str {
    match p {
        Preset::Desk => "desk",
        Preset::Full => "full",
    }
}
