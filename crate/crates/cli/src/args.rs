use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "mixgrad",
    version,
    about = "Fit mixture models by gradient ascent with reverse-mode AD"
)]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture model to a CSV file.
    Fit(FitArgs),
    /// Draw a labelled dataset from a random Gaussian mixture.
    Simulate(SimulateArgs),
    /// Compare optimizers and EM over a grid of simulated datasets.
    Benchmark(BenchmarkArgs),
    /// Automatic differentiation demonstrations and self-checks.
    Adbench(AdbenchArgs),
    /// Re-run the command recorded in an output document's manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Comma-separated numeric data, one row per observation.
    pub data: PathBuf,
    /// gmm, mclust, pgmm, mfa or tmm.
    #[arg(long, default_value = "gmm")]
    pub model: String,
    /// MClust constraint (EII, VVV, ...) or PGMM family (CCU, UUU, ...).
    #[arg(long)]
    pub constraint: Option<String>,
    #[arg(short, long)]
    pub k: usize,
    /// Latent dimension for pgmm and mfa.
    #[arg(short, long)]
    pub q: Option<usize>,
    /// gd, adam, newton-cg, or em (gmm only).
    #[arg(long, default_value = "adam")]
    pub method: String,
    /// Step size for gd and adam [default: 3e-4].
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// kmeans or random.
    #[arg(long, default_value = "kmeans")]
    pub init: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Covariance ridge for em.
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Skip the first line.
    #[arg(long)]
    pub header: bool,
    /// Column holding true labels: an index or `last`.
    #[arg(long)]
    pub label_col: Option<String>,
    /// Output JSON document.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(short, long)]
    pub n: usize,
    #[arg(short, long)]
    pub p: usize,
    #[arg(short, long)]
    pub k: usize,
    /// Means are uniform on [0, scale] per coordinate.
    #[arg(long, default_value_t = 5.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// full, eei or vvi.
    #[arg(long, default_value = "full")]
    pub cov: String,
    /// Dirichlet mixing weights instead of uniform ones.
    #[arg(long)]
    pub imbalance: bool,
    /// Extra pure-noise N(0, 1) columns.
    #[arg(long, default_value_t = 0)]
    pub noise_features: usize,
    /// Writes STEM.csv and STEM.json.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    #[arg(short, long, value_delimiter = ',', default_value = "512")]
    pub n: Vec<usize>,
    #[arg(short, long, value_delimiter = ',', default_value = "2,3,4")]
    pub p: Vec<usize>,
    #[arg(short, long, value_delimiter = ',', default_value = "2,3")]
    pub k: Vec<usize>,
    /// Number of seeds, run as 0..SEEDS.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "gd,adam,newton-cg,em")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 5.0)]
    pub scale: f64,
    /// Step size for gd and adam.
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Per-fit results CSV; the manifest goes next to it.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Per-group quartile CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Demo {
    /// Logistic-map derivative against closed forms and tape size.
    Logistic,
    /// Timing of the nested sigmoid chain.
    SigmoidChain,
    /// Random expressions against central differences.
    Gradcheck,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AdbenchArgs {
    #[arg(long, value_enum)]
    pub demo: Demo,
    /// Largest n for the logistic demo.
    #[arg(long, default_value_t = 10_000)]
    pub n_max: usize,
    /// Repetitions per timing.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Number of random expressions for gradcheck.
    #[arg(long, default_value_t = 50)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output; stdout when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A JSON document written by fit, simulate or benchmark.
    pub document: PathBuf,
    /// Where to write instead of the recorded location.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}
