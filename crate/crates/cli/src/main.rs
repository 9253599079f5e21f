//! `rptsc`: encode UCR datasets as recurrence plots, train and evaluate the
//! CNN classifier, run nearest-neighbour baselines and export learned kernels.

mod commands;
mod config;
mod inspect;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "rptsc",
    version,
    about = "Recurrence-plot time-series classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode every series of a dataset file as a recurrence-plot PNG.
    Encode(EncodeArgs),
    /// Train the CNN on a training set and report its test error.
    Train(TrainArgs),
    /// 1-NN Euclidean and/or DTW error rates.
    Baseline(BaselineArgs),
    /// Export the convolution kernels of a checkpoint as PNG tiles.
    Inspect(InspectArgs),
    /// Wins and average ranks from a table of error rates.
    Rank(RankArgs),
}

/// Where a train/test pair comes from: explicit files or an archive name.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training file in UCR format.
    #[arg(long, requires = "test", conflicts_with = "dataset")]
    pub train: Option<PathBuf>,
    /// Test file in UCR format.
    #[arg(long, requires = "train", conflicts_with = "dataset")]
    pub test: Option<PathBuf>,
    /// Archive dataset name, looked up as <NAME>_TRAIN / <NAME>_TEST.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Archive directory [default: $RPTSC_DATA, else data/ucr].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

/// Recurrence-plot flags shared by `encode` and `train`. Unset flags fall
/// back to the config file, then to the built-in defaults.
#[derive(Debug, Args)]
pub struct EncodeFlags {
    /// Embedding dimension.
    #[arg(long)]
    pub m: Option<usize>,
    /// Embedding delay in samples.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Distance between states: l1, l2 or linf.
    #[arg(long)]
    pub norm: Option<String>,
    /// Binarize with this epsilon instead of keeping gray levels.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Bright pixels for close states instead of distant ones.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub invert: Option<bool>,
    /// Min-max range per plot (per-plot) or over the whole dataset (global).
    #[arg(long)]
    pub scaling: Option<String>,
    /// Z-normalize each series before embedding.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub znormalize: Option<bool>,
}

impl EncodeFlags {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        push(&mut out, "m", self.m);
        push(&mut out, "tau", self.tau);
        push(&mut out, "norm", self.norm.as_ref());
        push(&mut out, "threshold", self.threshold);
        push(&mut out, "invert", self.invert);
        push(&mut out, "scaling", self.scaling.as_ref());
        push(&mut out, "znormalize", self.znormalize);
        out
    }
}

fn push<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: Option<T>) {
    if let Some(v) = v {
        out.push((key, v.to_string()));
    }
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Single UCR-format file to encode.
    #[arg(long, conflicts_with = "dataset")]
    pub input: Option<PathBuf>,
    /// Archive dataset name (with --split).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Which archive file to encode with --dataset: train or test.
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Archive directory [default: $RPTSC_DATA, else data/ucr].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Output directory (receives images/, index.csv, manifest.txt).
    #[arg(long, short)]
    pub out: PathBuf,
    /// key = value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output side length in pixels, or "native" for the K x K plot.
    #[arg(long)]
    pub size: Option<String>,
    #[command(flatten)]
    pub encode: EncodeFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory (receives manifest.txt, report.csv, model.ckpt).
    #[arg(long, short)]
    pub out: PathBuf,
    /// key = value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Select batch size and epochs on the validation split over the
    /// {5, 20} x {50, 250, 1000, 2000} grid; all cells go to grid.csv.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub grid: Option<bool>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// CNN input side length: 28, 56 or 64.
    #[arg(long)]
    pub input_size: Option<usize>,
    /// Odd convolution kernel side length.
    #[arg(long)]
    pub kernel_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of each class held out for best-snapshot selection.
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[command(flatten)]
    pub encode: EncodeFlags,
}

impl TrainArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        push(&mut out, "batch_size", self.batch_size);
        push(&mut out, "epochs", self.epochs);
        push(&mut out, "optimizer", self.optimizer.as_ref());
        push(&mut out, "learning_rate", self.learning_rate);
        push(&mut out, "input_size", self.input_size);
        push(&mut out, "kernel_size", self.kernel_size);
        push(&mut out, "seed", self.seed);
        push(&mut out, "validation_fraction", self.validation_fraction);
        out.extend(self.encode.overrides());
        out
    }
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// euclidean, dtw or both [default: dtw].
    #[arg(long)]
    pub metric: Option<String>,
    /// Sakoe-Chiba half-width for DTW [default: unconstrained].
    #[arg(long)]
    pub window: Option<usize>,
    /// CSV that results are appended to.
    #[arg(long, default_value = "results.csv")]
    pub results: PathBuf,
    /// key = value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Checkpoint written by `rptsc train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output directory for tiles and contact sheets.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Integer nearest-neighbour upscaling of each kernel pixel.
    #[arg(long, default_value_t = 8)]
    pub scale: usize,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// CSV with a header `dataset,<algorithm>,...` and one row of error
    /// rates per dataset; `-` or an empty cell marks a missing entry.
    #[arg(long)]
    pub input: PathBuf,
    /// dense, average or competition.
    #[arg(long, default_value = "dense")]
    pub ties: String,
}

fn configure_threads() -> Result<()> {
    let Some(raw) = std::env::var_os("RPTSC_THREADS") else {
        return Ok(());
    };
    let raw = raw.to_string_lossy();
    let threads: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("RPTSC_THREADS={raw:?} is not a thread count"))?;
    if threads == 0 {
        bail!("RPTSC_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the worker pool")
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Encode(args) => commands::encode(&args),
        Command::Train(args) => commands::train(&args),
        Command::Baseline(args) => commands::baseline(&args),
        Command::Inspect(args) => inspect::run(&args),
        Command::Rank(args) => commands::rank(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
