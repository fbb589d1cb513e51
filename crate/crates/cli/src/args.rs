use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "longtail",
    version,
    about = "Long-tail few-shot classification over precomputed embeddings"
)]
pub struct Cli {
    /// JSON config file (see README for the schema).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the config file or preset.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for every file a command writes.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Suppress the JSON summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert CSV embeddings and metadata to EMB1 and line-JSON, or generate a synthetic dataset.
    Ingest(IngestArgs),
    /// Train one model and write its checkpoint and training log.
    Train(TrainArgs),
    /// Score a checkpoint: top-k, per-class accuracy and a submission file.
    Eval(EvalArgs),
    /// Train once per mixup alpha and tabulate validation accuracy.
    SweepAlpha(SweepArgs),
    /// Train every preset in a list and tabulate the results.
    Ablate(AblateArgs),
    /// Run the three-round language-model protocol over the test split.
    Zeroshot(ZeroshotArgs),
    /// Print and write the reference-score comparison table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Image embedding CSV: row id, then feature values.
    #[arg(
        long,
        required_unless_present = "synthetic",
        conflicts_with = "synthetic"
    )]
    pub embeddings: Option<PathBuf>,
    /// Metadata as CSV with a header, or line-JSON (`.jsonl`).
    #[arg(
        long,
        required_unless_present = "synthetic",
        conflicts_with = "synthetic"
    )]
    pub metadata: Option<PathBuf>,
    /// Optional text embedding CSV aligned row by row with the images.
    #[arg(long, conflicts_with = "synthetic")]
    pub text: Option<PathBuf>,
    /// JSON synthetic-dataset spec to generate instead of converting files.
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Validation images per class for a synthetic dataset.
    #[arg(long, default_value_t = 5)]
    pub val_per_class: usize,
    /// Test images per class for a synthetic dataset.
    #[arg(long, default_value_t = 5)]
    pub test_per_class: usize,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DataArgs {
    /// EMB1 image embeddings covering every split.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Line-JSON metadata, one record per embedding row.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// EMB1 text embeddings, required by the fusion head.
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainFlags {
    /// Named configuration to start from.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Enable mixup with this alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Disable mixup even if the preset enables it.
    #[arg(long, conflicts_with = "alpha")]
    pub no_mixup: bool,
    /// Use inverse-class-frequency sampling.
    #[arg(long)]
    pub weighted: bool,
    /// Comma-separated objectives: category, poisonous, genus, species.
    #[arg(long, value_delimiter = ',')]
    pub objectives: Option<Vec<String>>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Labelled split to score.
    #[arg(long, value_enum, default_value_t = EvalSplit::Val)]
    pub split: EvalSplit,
    /// Categories per submission row.
    #[arg(long, default_value_t = 5)]
    pub top_n: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    /// `start:stop:step` or a comma-separated list; defaults to 0.1:2.0:0.05.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated presets; defaults to all (text presets need --text).
    #[arg(long, value_delimiter = ',')]
    pub presets: Option<Vec<String>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ZeroshotArgs {
    /// Line-JSON metadata: train rows define the taxonomy, test rows are classified.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// `mock:echo`, `mock:<fixture.jsonl>` or `http`.
    #[arg(long, default_value = "mock:echo")]
    pub transport: String,
    /// Chat-completion endpoint for the http transport.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Write every exchange to this fixture file for later replay.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub min_confidence: Option<u8>,
    #[arg(long)]
    pub max_retries: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Classify only the first N test observations.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// An `ablation.csv` whose runs are joined with the reference scores.
    #[arg(long)]
    pub ablation: Option<PathBuf>,
}
