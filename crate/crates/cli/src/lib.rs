//! Command line front end for the `senselearn` library.

pub mod data;
mod report;
mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use data::{load_dataset, read_dataset, save_dataset, write_dataset, DataError, Dataset, Gold};
pub use report::Report;
pub use run::run;

#[derive(Debug, Parser)]
#[command(name = "senselearn", version, about = "Learn classifiers over discrete features, with and without labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classification EM over a latent class
    Em(EmArgs),
    /// Gibbs sampling over a latent class
    Gibbs(GibbsArgs),
    /// Agglomerative clustering on the dissimilarity matrix
    Cluster(ClusterArgs),
    /// Sequential search over decomposable models
    Select(SelectArgs),
    /// Average of the models visited by a sequential search
    NaiveMix(SelectArgs),
    /// Naive Bayes from labeled data
    NaiveBayes(NaiveBayesArgs),
    /// Share of the most frequent label
    Majority(DataArgs),
    /// Repeated seeded runs of an unsupervised method scored against gold labels
    Evaluate(EvaluateArgs),
    /// Cross validation of a supervised method
    Cv(CvArgs),
    /// Accuracy of a supervised method as the training size grows
    LearningCurve(LearningCurveArgs),
}

impl Command {
    pub fn data_args(&self) -> &DataArgs {
        match self {
            Command::Em(a) => &a.data,
            Command::Gibbs(a) => &a.data,
            Command::Cluster(a) => &a.data,
            Command::Select(a) | Command::NaiveMix(a) => &a.data,
            Command::NaiveBayes(a) => &a.data,
            Command::Majority(a) => a,
            Command::Evaluate(a) => &a.data,
            Command::Cv(a) => &a.data,
            Command::LearningCurve(a) => &a.cv.data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV file with a header row
    #[arg(long)]
    pub data: PathBuf,
    /// Column holding the class; `?` marks a missing value
    #[arg(long)]
    pub class_col: Option<String>,
    /// Column of gold labels kept out of the features and used for scoring
    #[arg(long)]
    pub gold_col: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EmOptions {
    /// Convergence threshold on the largest parameter change
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    /// Fractional instead of most-probable class imputation
    #[arg(long)]
    pub soft: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GibbsOptions {
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1000)]
    pub monitor: usize,
    #[arg(long, default_value_t = 500)]
    pub increment: usize,
    #[arg(long, default_value_t = 5000)]
    pub max_total: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmOptions,
    /// Initial class per row, 0-based, separated by commas or whitespace
    #[arg(long, hide = true)]
    pub init_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GibbsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub gibbs: GibbsOptions,
    #[arg(long, hide = true)]
    pub init_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkageArg {
    Ward,
    Mcquitty,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub linkage: LinkageArg,
    #[arg(long)]
    pub k: usize,
    /// Seeds the choice among tied merges
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Aic,
    Bic,
    Chi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DofArg {
    Pairwise,
    Raw,
    Adjusted,
}

#[derive(Debug, Clone, Args)]
pub struct SearchOptions {
    #[arg(long, value_enum, default_value = "forward")]
    pub direction: DirectionArg,
    #[arg(long, value_enum, default_value = "aic")]
    pub criterion: CriterionArg,
    /// Significance cutoff for the chi2 criterion
    #[arg(long, default_value_t = 0.0001)]
    pub alpha: f64,
    /// Degrees of freedom used for the model differences
    #[arg(long, value_enum, default_value = "pairwise")]
    pub dof: DofArg,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub search: SearchOptions,
}

#[derive(Debug, Clone, Args)]
pub struct NaiveBayesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Pseudo-count added to every cell
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnsupervisedMethod {
    Em,
    Gibbs,
    Ward,
    Mcquitty,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: UnsupervisedMethod,
    /// Number of groups; defaults to the number of gold labels
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 25)]
    pub trials: usize,
    /// Seed of the first trial; trial t uses seed + t
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmOptions,
    #[command(flatten)]
    pub gibbs: GibbsOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupervisedMethod {
    NaiveBayes,
    Majority,
    Select,
    NaiveMix,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: SupervisedMethod,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub search: SearchOptions,
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
}

#[derive(Debug, Clone, Args)]
pub struct LearningCurveArgs {
    #[command(flatten)]
    pub cv: CvArgs,
    /// Training sizes; defaults to 10, 50, 100, 200, ... up to the training portion
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

impl From<senselearn::Error> for CliError {
    fn from(e: senselearn::Error) -> Self {
        CliError::Data(DataError::Model(e))
    }
}

impl CliError {
    /// 2 for usage errors, 3 for data errors, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(DataError::Model(e)) => model_exit_code(e),
            CliError::Data(_) | CliError::Output { .. } => 3,
        }
    }
}

fn model_exit_code(e: &senselearn::Error) -> i32 {
    use senselearn::Error as E;
    match e {
        E::InvalidParameter(_)
        | E::InvalidK { .. }
        | E::KTooLarge { .. }
        | E::Notation(_)
        | E::NotChordal
        | E::SizeTooLarge { .. } => 2,
        E::DegenerateClass { .. }
        | E::ZeroEvidence { .. }
        | E::ChainTooShort { .. }
        | E::Empty
        | E::ZeroExpectedNonzeroObserved { .. } => 4,
        E::LearnerFailure { source, .. } => model_exit_code(source),
        _ => 3,
    }
}
