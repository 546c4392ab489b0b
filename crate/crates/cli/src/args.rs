use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hullaudit_core::harness::SyntheticDistribution;
use hullaudit_core::{ScalingMode, SolverConfig, Variant};

#[derive(Debug, Parser)]
#[command(name = "hullaudit", version, about = "Convex-hull extrapolation audits for tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify every test row against the hull of the training rows.
    Analyze(AnalyzeArgs),
    /// k-fold cross-validation over a single table.
    Cv(CvArgs),
    /// Report on a single query row; exit 0 inside, 3 outside, 4 indeterminate.
    Check(CheckArgs),
    /// Benchmark on generated data.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct Shared {
    /// Schema file (TOML, or JSON by extension). Inferred from the data when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value = "minmax")]
    pub scaling: ScalingMode,
    /// Membership tolerance in transformed units.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-6)]
    pub tau: f64,
    /// Relative duality-gap tolerance.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-10)]
    pub gap: f64,
    /// Share above which a feature is listed as significant.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.05)]
    pub significance: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value = "away_step_fw")]
    pub variant: Variant,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "HULLAUDIT_JOBS")]
    pub jobs: Option<usize>,
}

impl Shared {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            gap_tolerance: self.gap,
            membership_tolerance: self.tau,
            max_iterations: self.max_iter,
            variant: self.variant,
            seed: 0,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write each fold's reports under `fold-<i>/`.
    #[arg(long)]
    pub fold_reports: bool,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// File holding exactly one data row in the training schema.
    #[arg(long)]
    pub query: PathBuf,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value = "uniform_box")]
    pub distribution: SyntheticDistribution,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    /// Draw queries as convex combinations of training rows instead of
    /// fresh samples.
    #[arg(long)]
    pub interior: bool,
    #[command(flatten)]
    pub shared: Shared,
}
