//! Command-line front end: evidence, MAP/top-k trees, leaf fits,
//! hyperparameter tuning, rolling forecasts, and simulation, as JSON on
//! stdout. `RUST_LOG` controls log verbosity; everything else is flags.

mod commands;
mod ingest;
mod model_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctar::CtarError;
use serde::Serialize;

use ingest::TransformKind;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Parse(String),
    Usage(String),
    Core(CtarError),
}

impl CliError {
    fn io(msg: String) -> Self {
        CliError::Io(msg)
    }

    fn parse(msg: String) -> Self {
        CliError::Parse(msg)
    }

    fn usage(msg: String) -> Self {
        CliError::Usage(msg)
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::Usage(_) => "usage",
            CliError::Core(CtarError::InvalidInput(_)) => "invalid_input",
            CliError::Core(CtarError::Config(_)) => "config",
            CliError::Core(CtarError::Structure(_)) => "structure",
            CliError::Core(CtarError::Numerical(_)) => "numerical",
            CliError::Core(CtarError::Capacity(_)) => "capacity",
            CliError::Core(CtarError::Tuning(_)) => "tuning",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Io(m) | CliError::Parse(m) | CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

impl From<CtarError> for CliError {
    fn from(e: CtarError) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(
    name = "ctar",
    about = "Context-tree autoregressive models: exact evidence, MAP trees, tuning, and forecasting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact log evidence of the series under the model class.
    Evidence(AnalyseArgs),
    /// The a-posteriori most likely context tree with its posterior.
    Map(AnalyseArgs),
    /// The k a-posteriori most likely context trees.
    Topk(TopkArgs),
    /// MAP tree plus per-leaf posterior parameter summaries.
    Fit(AnalyseArgs),
    /// Score threshold/order candidates by evidence and pick the best.
    Tune(AnalyseArgs),
    /// Rolling one-step forecasts over a train/test split.
    Forecast(ForecastArgs),
    /// Draw a series from a tree-AR model file.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataOpts {
    /// CSV input (comma delimiter, optional header).
    #[arg(short, long)]
    input: PathBuf,

    /// Column to read: 0-based index or header name.
    #[arg(long, default_value = "0")]
    column: String,

    /// Preprocessing transform applied to the ingested series.
    #[arg(long, value_enum, default_value_t = TransformKind::None)]
    transform: TransformKind,
}

#[derive(Args)]
struct ModelOpts {
    /// Maximum context depth.
    #[arg(short = 'D', long, default_value_t = 2)]
    depth: usize,

    /// Quantiser alphabet size.
    #[arg(short = 'm', long, default_value_t = 2)]
    alphabet: usize,

    /// Tree prior parameter; defaults to 1 - 2^{-(m-1)}.
    #[arg(long)]
    beta: Option<f64>,

    /// Comma-separated thresholds, or "tune" to select them by evidence.
    #[arg(long, default_value = "tune")]
    thresholds: String,

    /// AR order, or "tune" to select it by evidence.
    #[arg(short = 'p', long, default_value = "tune")]
    order: String,

    /// Include a constant term in each leaf model.
    #[arg(long)]
    intercept: bool,

    /// Inverse-gamma shape of the noise-variance prior.
    #[arg(long, default_value_t = 2.0)]
    tau: f64,

    /// Inverse-gamma scale of the noise-variance prior.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,

    /// Prior coefficient mean (constant across dimensions).
    #[arg(long, default_value_t = 0.0)]
    mu0: f64,

    /// File with one prior-mean entry per line (overrides --mu0).
    #[arg(long)]
    mu0_file: Option<PathBuf>,

    /// Prior coefficient scale s, for the matrix s * I.
    #[arg(long, default_value_t = 1.0)]
    sigma0: f64,

    /// CSV file with the full prior scale matrix (overrides --sigma0).
    #[arg(long)]
    sigma0_file: Option<PathBuf>,

    /// Largest AR order tried when tuning the order.
    #[arg(long, default_value_t = 5)]
    p_max: usize,

    /// Number of quantile grid points for threshold tuning.
    #[arg(long, default_value_t = 8)]
    grid_points: usize,

    /// Search all increasing threshold subsets instead of symmetric pairs.
    #[arg(long)]
    exhaustive_grid: bool,
}

#[derive(Args)]
struct AnalyseArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    model: ModelOpts,
}

#[derive(Args)]
struct TopkArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    model: ModelOpts,

    /// Number of trees to report.
    #[arg(short, long, default_value_t = 5)]
    k: usize,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    model: ModelOpts,

    /// Fraction of the series used for training.
    #[arg(long, default_value_t = 0.5)]
    split: f64,

    /// Freeze the training-time MAP tree instead of refitting each step.
    #[arg(long)]
    no_refit: bool,

    /// Report forecasts on the level scale (undoing diff/logdiff).
    #[arg(long)]
    invert_transform: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Tree-AR model description (JSON).
    #[arg(long)]
    model: PathBuf,

    /// Number of samples to draw.
    #[arg(short, long)]
    n: usize,

    /// RNG seed; the draw is deterministic given the seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output file, one sample per line.
    #[arg(short, long)]
    out: PathBuf,

    /// Comma-separated initial history (defaults to zeros).
    #[arg(long)]
    init: Option<String>,
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
}

#[derive(Serialize)]
struct ErrorOut {
    error: ErrorBody,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("valid JSON"));
            ExitCode::SUCCESS
        }
        Err(err) => {
            let body = ErrorOut {
                error: ErrorBody {
                    kind: err.kind(),
                    message: err.message(),
                },
            };
            println!("{}", serde_json::to_string_pretty(&body).expect("valid JSON"));
            ExitCode::FAILURE
        }
    }
}
