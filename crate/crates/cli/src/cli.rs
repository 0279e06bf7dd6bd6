use std::path::PathBuf;

use calibkit::hydration::{DEFAULT_GRID_POINTS, DEFAULT_T_MAX_H, DEFAULT_T_MIN_H};
use calibkit::strategies::StrategyId;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Surrogate-assisted calibration of the affinity cement hydration model.
#[derive(Debug, Parser)]
#[command(name = "calibkit", version)]
pub struct Cli {
    /// TOML file with seed, sizes and [train], [optimizer], [conditions] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for every random stage; overrides the config file.
    #[arg(long, global = true, env = "CALIBKIT_SEED")]
    pub seed: Option<u64>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one curve (--p) or a bundle for every design row (--design).
    Simulate(SimulateArgs),
    /// Generate an optimized Latin hypercube or a uniform random design.
    Doe(DoeArgs),
    /// Spearman sensitivity of every response component to every parameter.
    Sense(SenseArgs),
    /// Principal components of a bundle.
    Pca(PcaArgs),
    /// Train the surrogate bank of one strategy.
    Train(TrainArgs),
    /// Identify parameters with a forward or error-function bank.
    Calibrate(CalibrateArgs),
    /// Identify parameters with an inverse bank.
    Identify(IdentifyArgs),
    /// Identify parameters with the simulator in the loop (no surrogate).
    Direct(DirectArgs),
    /// Merge report files into one comparison table.
    Report(ReportArgs),
    /// Design, simulate, train and verify one strategy end to end.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// First grid time in hours.
    #[arg(long, default_value_t = DEFAULT_T_MIN_H)]
    pub t_min: f64,
    /// Last grid time in hours.
    #[arg(long, default_value_t = DEFAULT_T_MAX_H)]
    pub t_max: f64,
    /// Number of log-uniform grid points.
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Four standardized parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Option<Vec<f64>>,
    /// Design CSV; writes one bundle column per row.
    #[arg(long, conflicts_with = "p")]
    pub design: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Isothermal temperature in degrees Celsius.
    #[arg(long, allow_negative_numbers = true)]
    pub temperature: Option<f64>,
    /// Activation energy in J/mol.
    #[arg(long)]
    pub activation_energy: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DoeKind {
    Lhs,
    Random,
}

#[derive(Debug, Args)]
pub struct DoeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = DoeKind::Lhs)]
    pub kind: DoeKind,
    /// Swap attempts for the LHS optimization.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SenseArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ObservedArgs {
    /// CSV with `time_h,alpha` or `time_h,heat_J_per_g` columns.
    #[arg(long)]
    pub observed: PathBuf,
    /// Hours added to every observation time.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub time_shift: f64,
    /// Potential heat in J/g for heat input.
    #[arg(long)]
    pub qpot: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub strategy: StrategyId,
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, requires = "test_bundle")]
    pub test_design: Option<PathBuf>,
    #[arg(long, requires = "test_design")]
    pub test_bundle: Option<PathBuf>,
    /// Observed curve the error-function strategies are trained against.
    #[arg(long)]
    pub observed: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true, requires = "observed")]
    pub time_shift: f64,
    #[arg(long, requires = "observed")]
    pub qpot: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidationArgs {
    #[command(flatten)]
    pub observed: ObservedArgs,
    /// Training bundle; its spread normalizes the response error.
    #[arg(long)]
    pub bundle: PathBuf,
    /// Report JSON; a CSV with the same stem is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Bank directory written by `train`.
    #[arg(long)]
    pub bank: PathBuf,
    #[command(flatten)]
    pub validation: ValidationArgs,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[command(flatten)]
    pub validation: ValidationArgs,
}

#[derive(Debug, Args)]
pub struct DirectArgs {
    /// Error function to minimize: F1 or F2.
    #[arg(long, default_value = "F1")]
    pub function: String,
    #[arg(long, allow_negative_numbers = true)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub activation_energy: Option<f64>,
    #[command(flatten)]
    pub validation: ValidationArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Calibration or pipeline report JSON files.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub strategy: StrategyId,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}
