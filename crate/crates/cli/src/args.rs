use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pancake_core::tester::DEFAULT_ORDER_CONSTANT;

#[derive(Debug, Parser)]
#[command(
    name = "pancake",
    version,
    about = "Moment-matching designs and parallel-pancake testing experiments"
)]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, env = "PANCAKE_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Invocation,
}

#[derive(Debug, Subcommand)]
pub enum Invocation {
    #[command(flatten)]
    Run(Command),
    /// Re-run the command recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// Everything that determines a run's outputs besides the seed.
#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum Command {
    /// Gauss–Hermite rule and its moment-error table.
    Quadrature(QuadratureArgs),
    /// Search for a moment-matching design, or the largest matchable order.
    Design(DesignArgs),
    /// Build or inspect a pancake instance.
    #[command(subcommand)]
    Instance(InstanceCommand),
    /// Draw samples from an instance or the standard Gaussian.
    Sample(SampleArgs),
    /// Null-quantile threshold table for the tester.
    Calibrate(CalibrateArgs),
    /// Run the moment-tensor tester.
    Test(TestArgs),
    /// Run numerical checks of the supporting inequalities.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Quadrature(_) => "quadrature",
            Command::Design(_) => "design",
            Command::Instance(InstanceCommand::Make(_)) => "instance-make",
            Command::Instance(InstanceCommand::Inspect(_)) => "instance-inspect",
            Command::Sample(_) => "sample",
            Command::Calibrate(_) => "calibrate",
            Command::Test(_) => "test",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct QuadratureArgs {
    /// Number of nodes.
    #[arg(long)]
    pub t: usize,
}

/// A fixed number of moments, or `max` for the largest matchable one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentTarget {
    Order(usize),
    Max,
}

impl FromStr for MomentTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "max" {
            return Ok(MomentTarget::Max);
        }
        s.parse()
            .map(MomentTarget::Order)
            .map_err(|_| format!("expected a moment count or `max`, got `{s}`"))
    }
}

impl fmt::Display for MomentTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentTarget::Order(m) => write!(f, "{m}"),
            MomentTarget::Max => f.write_str("max"),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DesignArgs {
    /// Support size.
    #[arg(long)]
    pub k: usize,
    /// Number of points with free weights.
    #[arg(long, default_value_t = 0)]
    pub kp: usize,
    /// Moments to match, or `max`.
    #[arg(long)]
    pub m: MomentTarget,
    /// Tolerance on max |E[h_i]|.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Random restarts per search.
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    /// Largest order tried in `max` mode.
    #[arg(long, default_value_t = 48)]
    pub m_budget: usize,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum InstanceCommand {
    /// Lift a design into d dimensions and write instance.json.
    Make(MakeArgs),
    /// Print k, k', delta, w_min and the Hermite moment profile.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MakeArgs {
    /// Design file (DesignResult or DiscreteDist1D JSON); overrides --k.
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Support size of a freshly searched design.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub kp: usize,
    /// Moments to match; `max` takes the best witness.
    #[arg(long, default_value = "max")]
    pub m: MomentTarget,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    /// Variance deficit along the hidden direction, in (0, 1).
    #[arg(long, default_value_t = 0.9)]
    pub delta: f64,
    #[arg(long)]
    pub d: usize,
    /// `random`, `axis:J`, or comma-separated coordinates.
    #[arg(long, default_value = "random")]
    pub direction: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InspectArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Constant c in the order budget ceil(c (log2 k + k')).
    #[arg(long, default_value_t = DEFAULT_ORDER_CONSTANT)]
    pub c_order: f64,
    /// Order budget override.
    #[arg(long)]
    pub m_budget: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    Bin,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    /// Instance file or `null`.
    #[arg(long)]
    pub source: String,
    /// Dimension of the null source.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = SampleFormat::Bin)]
    pub format: SampleFormat,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.999)]
    pub quantile: f64,
    /// Orders 1..=m+1 are calibrated.
    #[arg(long, default_value_t = 4)]
    pub m_budget: usize,
    /// c1 in the norm screen sqrt(d + c1 ln(n trials/(1-q)) + c2 sqrt(d ln(n/(1-q)))).
    #[arg(long, default_value_t = 4.0)]
    pub norm_c1: f64,
    #[arg(long, default_value_t = 4.0)]
    pub norm_c2: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TestArgs {
    /// Instance file or `null`.
    #[arg(long)]
    pub source: String,
    /// Dimension of the null source (defaults to the calibration's).
    #[arg(long)]
    pub d: Option<usize>,
    /// Calibration table from `calibrate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Use worst-case thresholds instead of a calibration table.
    #[arg(long)]
    pub paper_thresholds: bool,
    /// delta for worst-case thresholds (defaults to the instance's).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Constant C in the worst-case thresholds.
    #[arg(long, default_value_t = 1.0)]
    pub c_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_ORDER_CONSTANT)]
    pub c_order: f64,
    /// Order budget override.
    #[arg(long)]
    pub m_budget: Option<usize>,
    /// Target failure probability; sets the repetition count.
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Samples per check (worst-case mode; calibrated runs use the table's n).
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
}
