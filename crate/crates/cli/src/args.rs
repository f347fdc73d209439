use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use spdsl::spd::MetricKind;

/// Geometry-aware similarity learning on SPD matrices.
#[derive(Debug, Parser)]
#[command(name = "spdsl", version)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a transform W and write it with the iteration trace.
    Train(TrainArgs),
    /// Repeated stratified 1-NN evaluation with and without a transform.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic labeled SPD dataset.
    Synth(SynthArgs),
    /// Turn a manifest of feature-set files into covariance descriptors.
    Describe(DescribeArgs),
}

/// Settings shared by `train` and `eval`; flags override the config file.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest (`<sample_id> <class_label> <relative_path>` per line).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub metric: Option<MetricKind>,
    /// Reduced dimension m (must be below the SPD dimension n).
    #[arg(long)]
    pub target_dim: Option<usize>,
    /// Within-class neighbors per sample.
    #[arg(long)]
    pub vw: Option<usize>,
    /// Between-class neighbors per sample.
    #[arg(long)]
    pub vb: Option<usize>,
    /// Kernel bandwidth: "auto" or a positive number.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory for `transform.txt` and `trace.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run a gradient check first and refuse to train if it fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Evaluate this fixed transform instead of training one per split.
    #[arg(long)]
    pub transform: Option<PathBuf>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Neighbors for the k-NN vote.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Check one metric only (default: all).
    #[arg(long)]
    pub metric: Option<MetricKind>,
    /// Random instances per metric.
    #[arg(long, default_value_t = 5)]
    pub instances: u64,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 12)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Failure threshold on the relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (manifest.txt and samples/).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    #[arg(long, default_value_t = 1.5)]
    pub noise: f64,
    /// Restrict class differences to a subspace of this dimension.
    #[arg(long)]
    pub informative_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    /// Manifest whose entries point at feature-set files (one frame per line).
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory for the descriptor matrices and their manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Append the mean to the covariance descriptor.
    #[arg(long)]
    pub augment_mean: bool,
    /// Fail on feature sets with zero covariance instead of using a ridge floor.
    #[arg(long)]
    pub strict: bool,
}
