//! Command-line front end. Results go to stdout as `key=value` lines (or
//! CSV), diagnostics to stderr. Exit codes: 0 ok, 1 runtime failure, 2 usage.

mod commands;
mod plan;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;

#[derive(Parser, Debug)]
#[command(name = "fdsc", version, about = "Learned screen-content image codec")]
pub struct Cli {
    /// More log output on stderr (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only errors on stderr.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    /// Compute device; only `cpu` is available.
    #[arg(long, global = true, default_value = "cpu")]
    pub device: String,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write a checkpoint plus a per-epoch CSV log.
    Train(TrainArgs),
    /// Encode a PNG/PPM image into an .fdsc container.
    Encode(EncodeArgs),
    /// Decode an .fdsc container into an image.
    Decode(DecodeArgs),
    /// Code every image of a directory with one or more checkpoints.
    Eval(EvalArgs),
    /// BD-rate of a test RD curve against an anchor curve, in percent.
    Bdrate(BdrateArgs),
    /// Print the header and substream sizes of an .fdsc container.
    Inspect(InspectArgs),
    /// Write a synthetic screen-content dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Flat key=value config file (training and model keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the desk preset.
    #[arg(long, conflicts_with = "full")]
    pub desk: bool,
    /// Start from the full preset.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory of PNG/PPM training images (synthetic images otherwise).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Any config key, e.g. `--set batch=4`; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV log (defaults to the checkpoint path with `.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Append a CRC-32 trailer.
    #[arg(long)]
    pub checksum: bool,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    pub stream: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Original image; prints psnr= (and msssim= when large enough).
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub dir: PathBuf,
    /// Checkpoints, one per rate point.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Per-image RD CSV; stdout when omitted.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Summary JSON (means and BD-rates).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Interp {
    Cubic,
    Pchip,
}

#[derive(Args, Debug)]
pub struct BdrateArgs {
    pub anchor: PathBuf,
    pub test: PathBuf,
    #[arg(long, value_enum, default_value = "cubic")]
    pub interp: Interp,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub stream: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(fdsc::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<fdsc::Error> for CliError {
    fn from(e: fdsc::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}
