use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ctpt_core::regression::ErrorFamily;

#[derive(Debug, Parser)]
#[command(name = "ctpt", version, about = "Bayesian regression and mediation analysis with centred two-piece Student t errors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one linear regression.
    Fit(FitArgs),
    /// Simple mediation analysis X -> M -> Y with Bayes factors.
    Mediate(MediateArgs),
    /// Compare the four error families by marginal likelihood.
    Compare(CompareArgs),
    /// Run a recovery or power study from a scenario file.
    Simulate(SimulateArgs),
    /// Evaluate or sample the error distribution.
    Dist(DistArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed (falls back to the config file, then CTPT_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
    /// normal, student_t (nu-only), skew_normal (gamma-only) or ctpt (full).
    #[arg(long)]
    pub family: Option<ErrorFamily>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub burn_in_fraction: Option<f64>,
    /// Do not add an intercept column.
    #[arg(long)]
    pub no_intercept: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Comma-separated predictor columns.
    #[arg(long, value_delimiter = ',')]
    pub predictors: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PartitionArgs {
    /// Prior mass of the null with both paths absent.
    #[arg(long, requires_all = ["q01", "q10"])]
    pub q00: Option<f64>,
    /// Prior mass of the null with only beta present.
    #[arg(long, requires_all = ["q00", "q10"])]
    pub q01: Option<f64>,
    /// Prior mass of the null with only alpha present.
    #[arg(long, requires_all = ["q00", "q01"])]
    pub q10: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MediateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub partition: PartitionArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub m: String,
    #[arg(long)]
    pub y: String,
    /// Also report an HPD interval of this mass for alpha * beta.
    #[arg(long)]
    pub hpd: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Mediation layout: compare both equations.
    #[arg(long, requires_all = ["m", "y"], conflicts_with_all = ["response", "predictors"])]
    pub x: Option<String>,
    #[arg(long, requires_all = ["x", "y"])]
    pub m: Option<String>,
    #[arg(long, requires_all = ["x", "m"])]
    pub y: Option<String>,
    /// Single-regression layout.
    #[arg(long, required_unless_present = "x")]
    pub response: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub predictors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Recovery,
    Power,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    /// Override the scenario's mode.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pick the BF cutoff that yields this false-positive rate.
    #[arg(long)]
    pub match_fpr: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Directory for the JSON and CSV outputs.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Degrees of freedom, or "inf" for the normal limit.
    #[arg(long, default_value = "inf")]
    pub nu: String,
    /// Print this many decimals instead of the shortest exact form.
    #[arg(long)]
    pub digits: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[command(subcommand)]
    pub op: DistOp,
}

#[derive(Debug, Subcommand)]
pub enum DistOp {
    Pdf {
        #[command(flatten)]
        spec: SpecArgs,
        /// Evaluate the uncentred (mode-at-zero) density instead.
        #[arg(long)]
        uncentred: bool,
        #[arg(required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    Cdf {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        uncentred: bool,
        #[arg(required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    Quantile {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(required = true)]
        p: Vec<f64>,
    },
    Sample {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// CSV of Fisher and Arnold-Groeneveld skewness over a gamma grid.
    Skewcurve {
        #[arg(long, default_value = "inf")]
        nu: String,
        #[arg(long, default_value_t = 0.1)]
        from: f64,
        #[arg(long, default_value_t = 10.0)]
        to: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Space the grid evenly in log gamma.
        #[arg(long)]
        log_grid: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}
