use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "garment-edit", version, about = "Build and filter garment edit datasets", propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage, then write the manifest and stats.
    Run(RunArgs),
    /// Propose text triplets for each corpus image and category.
    Synthesize(RunArgs),
    /// Synthesize, then produce edited images.
    EditImages(RunArgs),
    /// Continue through dependency-graph extraction.
    BuildGraphs(RunArgs),
    /// Continue through question answering (no scoring).
    Answer(RunArgs),
    /// Score one graph against one answer file and print the report.
    Score(ScoreArgs),
    /// Re-apply the threshold to a stored manifest.
    Filter(ManifestArgs),
    /// Recompute dataset statistics from a stored manifest.
    Stats(ManifestArgs),
    /// Check a graph document and print its question depths.
    ValidateGraph(ValidateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct WeightArgs {
    /// Weight of instruction-critical questions
    #[arg(long = "weights.w_icq", value_name = "F")]
    pub w_icq: Option<f64>,
    /// Weight of preservation questions
    #[arg(long = "weights.w_cpq", value_name = "F")]
    pub w_cpq: Option<f64>,
    /// Per-level decay of dependent question weights
    #[arg(long = "weights.t_decay", value_name = "F")]
    pub t_decay: Option<f64>,
    /// Keep threshold on the score
    #[arg(long = "weights.alpha", value_name = "F")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (TOML)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Directory of corpus images (overrides run.corpus_dir)
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    /// Use the offline mock backend with canned replies from DIR
    #[arg(long, value_name = "DIR")]
    pub mock_fixtures: Option<PathBuf>,
    /// Run seed (overrides run.seed)
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory (overrides run.output_dir)
    #[arg(long, value_name = "PATH")]
    pub output_dir: Option<PathBuf>,
    /// Number of instruction keywords in the stats table
    #[arg(long, value_name = "N")]
    pub top_k_keywords: Option<usize>,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// Dependency graph document (JSON)
    pub graph: PathBuf,
    /// Answer document (JSON)
    pub answers: PathBuf,
    /// Optional run configuration to take weights from
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ManifestArgs {
    /// Run configuration (TOML)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory holding the manifest (overrides run.output_dir)
    #[arg(long, value_name = "PATH")]
    pub output_dir: Option<PathBuf>,
    /// Number of instruction keywords in the stats table
    #[arg(long, value_name = "N")]
    pub top_k_keywords: Option<usize>,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Dependency graph document (JSON)
    pub graph: PathBuf,
}
