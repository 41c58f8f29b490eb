//! Command-line front end: corpus ingestion, training, evaluation,
//! prediction, hyperparameter search and t-SNE projection.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use alertclf::features::{RepresentationSelector, ViewSelector};

pub mod commands;

/// Exit status for success.
pub const EXIT_OK: u8 = 0;
/// Bad flags or flag values.
pub const EXIT_USAGE: u8 = 1;
/// Unreadable, malformed or unsuitable data.
pub const EXIT_DATA: u8 = 2;
/// Training or projection failed numerically.
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] alertclf::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(alertclf::Error::InvalidArgument(_) | alertclf::Error::EmptySearchSpace) => EXIT_USAGE,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "alertclf", version, about = "Classify news alerts as public-health events")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a raw JSONL file and write the accepted records.
    Ingest(IngestArgs),
    /// Per-text corpus statistics.
    Stats(StatsArgs),
    /// Shuffle a labeled corpus into train/dev/test files.
    Split(SplitArgs),
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
    /// Train word vectors on the titles and descriptions of a corpus.
    Glove(GloveArgs),
    /// Train one representation/view configuration.
    Train(TrainArgs),
    /// Score a saved model against a labeled corpus.
    Evaluate(EvaluateArgs),
    /// Label documents with a saved model.
    Predict(PredictArgs),
    /// Random hyperparameter search scored on the dev set.
    Search(SearchArgs),
    /// 2-D t-SNE projection of document vectors.
    Project(ProjectArgs),
    /// Train and test all nine representation/view configurations.
    Sweep(SweepArgs),
    /// Compare logistic regression, naive Bayes and a linear SVM on TF-IDF.
    Baselines(BaselinesArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Also write the statistics as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for train.jsonl, dev.jsonl and test.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dev_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub num_docs: usize,
    /// Per-text probability that the class cues are dropped.
    #[arg(long, default_value_t = 0.15)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.45)]
    pub event_fraction: f64,
}

#[derive(Debug, Args)]
pub struct GloveArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    /// Co-occurrence count at which the weighting saturates.
    #[arg(long, default_value_t = 100.0)]
    pub x_max: f64,
}

/// Where training data comes from: `--corpus` alone is shuffled into
/// train/dev/test; with `--dev` it is used whole for training.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Seed of the train/dev/test shuffle when `--dev` is absent.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Args, Clone)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Update the word vectors during RNN training.
    #[arg(long)]
    pub fine_tune: bool,
    /// Word vectors for the RNN representation.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub rep: RepresentationSelector,
    #[arg(long)]
    pub view: ViewSelector,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Model file to write; the dev report goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Machine-readable report.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, conflicts_with_all = ["title", "description"])]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub description: Option<String>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// JSONL output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub rep: RepresentationSelector,
    #[arg(long)]
    pub view: ViewSelector,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub budget: usize,
    /// Log-uniform range for lambda, as LOW,HIGH.
    #[arg(long, default_value = "1e-6,1e-1")]
    pub lambda_range: String,
    /// Log-uniform range for the RNN learning rate, as LOW,HIGH.
    #[arg(long, default_value = "1e-4,1e-2")]
    pub learning_rate_range: String,
    /// Candidate RNN hidden sizes, comma separated.
    #[arg(long, default_value = "32,64,128")]
    pub hidden_sizes: String,
    /// Candidate RNN batch sizes, comma separated.
    #[arg(long, default_value = "16,32,64")]
    pub batch_sizes: String,
    /// Best model file; the trial log goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Model whose document vectors are projected.
    #[arg(long, conflicts_with = "vectors", required_unless_present = "vectors")]
    pub model: Option<PathBuf>,
    /// JSONL of `{"id": ..., "vector": [...]}` rows to project instead.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// View used in file names (defaults to the model's view).
    #[arg(long)]
    pub view: Option<ViewSelector>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    /// Step size (defaults to the number of points divided by 12).
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Dimension of word vectors trained when `--embeddings` is absent.
    #[arg(long, default_value_t = 50)]
    pub glove_dim: usize,
    #[arg(long, default_value_t = 15)]
    pub glove_epochs: usize,
    /// Weighting cutoff for those vectors; small corpora need a low value.
    #[arg(long, default_value_t = 10.0)]
    pub glove_x_max: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub view: ViewSelector,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub svm_c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nb_alpha: f64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Parses `argv` and runs the command, returning the process exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
