//! `epifuse`: synthesize data, train the forecasters, run the filter and the
//! baselines, and emit comparison tables.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "epifuse",
    version,
    about = "Fused-CNN epidemic forecasting with an ensemble Kalman filter"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML run configuration with one section per module.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for training, grids and the filter (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (temporal CSV, density frames, ground truth).
    Synth(SynthArgs),
    /// Train CNN-T, CNN-S and the fused model.
    Train(TrainArgs),
    /// Cross-validated grid search over a donor architecture.
    Grid(GridArgs),
    /// Run the ensemble Kalman filter with the fused model as forward model.
    Assimilate(AssimilateArgs),
    /// Run an SEIR-family baseline over the dataset period.
    Baseline(BaselineArgs),
    /// Score prediction files against the ground truth.
    Compare(CompareArgs),
    /// Emit a results table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub days: Option<usize>,
    /// Density grid as ROWS COLS.
    #[arg(long, num_args = 2, value_names = ["ROWS", "COLS"])]
    pub grid: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Epif,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Temporal,
    Spatial,
    Fused,
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub model: ModelArg,
    /// First conv kernel as K1 K2.
    #[arg(long, num_args = 2, value_names = ["K1", "K2"])]
    pub kernel1: Option<Vec<usize>>,
    /// Second conv kernel as K1 K2.
    #[arg(long, num_args = 2, value_names = ["K1", "K2"])]
    pub kernel2: Option<Vec<usize>>,
    /// Filter counts of the two conv layers.
    #[arg(long, num_args = 2, value_names = ["L1", "L2"])]
    pub filters: Option<Vec<usize>>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Directory holding pre-trained temporal.epif and spatial.epif (default: --out).
    #[arg(long)]
    pub donors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "temporal")]
    pub model: ModelArg,
    /// Grid file (TOML or JSON `axes = [{ name, values }]`); default: the kernel/filter grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Zero,
    One,
    PreviousState,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    Mean,
    Median,
}

#[derive(Debug, Args)]
pub struct AssimilateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Trained fused model (default: <out>/fused.epif).
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// Observation variance scale: R = r·I.
    #[arg(long)]
    pub r_scale: Option<f64>,
    #[arg(long, value_enum)]
    pub selection: Option<SelectionArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Seir,
    Extended,
    Network,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "extended")]
    pub variant: VariantArg,
    /// Transmission rate β.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Checkpoint dates (YYYY-MM-DD) replacing the configured ones in order.
    #[arg(long, num_args = 1..)]
    pub checkpoints: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// NAME=PATH of a CSV with a date column and a case column; repeatable.
    /// The first file fixes the scored dates.
    #[arg(long = "predictions", value_name = "NAME=PATH", required = true)]
    pub predictions: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(subcommand)]
    pub kind: ReportKind,
}

#[derive(Debug, Subcommand)]
pub enum ReportKind {
    /// Donor vs fused MAEs with relative improvements, from a training report.
    Fusion {
        /// train_report.json written by `train` (default: <out>/train_report.json).
        #[arg(long)]
        train_report: Option<PathBuf>,
    },
    /// CNN-T and CNN-S on cases, deaths and both.
    Ablation {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Filter settings sweep over the held-out days.
    Enkf {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model_file: Option<PathBuf>,
    },
    /// Kernel-width recovery on planted-filter data.
    KernelRecovery,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.global.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.global.out).map_err(|e| error::file_error(&cli.global.out, e))?;
    let out = cli.global.out.as_path();
    match cli.command {
        Command::Synth(a) => commands::synth(&mut config, &a, out),
        Command::Train(a) => commands::train(&mut config, &a, out),
        Command::Grid(a) => commands::grid(&mut config, &a, out),
        Command::Assimilate(a) => commands::assimilate(&mut config, &a, out),
        Command::Baseline(a) => commands::baseline(&mut config, &a, out),
        Command::Compare(a) => commands::compare(&config, &a, out),
        Command::Report(a) => commands::report(&mut config, &a, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
