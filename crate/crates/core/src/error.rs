use thiserror::Error;

/// Errors raised by the learners and evaluation protocols.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("row {row}: variable {var} has level {level}, cardinality is {cardinality}")]
    LevelOutOfRange {
        row: usize,
        var: usize,
        level: usize,
        cardinality: usize,
    },
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("observation set is empty")]
    EmptyData,
    #[error("class value is missing in row {row}")]
    MissingValue { row: usize },
    #[error("variables {vars:?} are not a subset of {of:?}")]
    NotSubset { vars: Vec<usize>, of: Vec<usize> },
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("the data has no class variable")]
    NoClassVariable,
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("class {class} has zero support")]
    DegenerateClass { class: usize },
    #[error("zero evidence: every class has probability 0 for rows {rows:?}")]
    ZeroEvidence { rows: Vec<usize> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("chain of length {len} is too short, need at least {min}")]
    ChainTooShort { len: usize, min: usize },
    #[error("empty chain")]
    Empty,
    #[error("invalid cluster count {k} for {n} observations")]
    InvalidK { k: usize, n: usize },
    #[error("graph is not chordal")]
    NotChordal,
    #[error("model notation error: {0}")]
    Notation(String),
    #[error("event space of {cells} cells exceeds the limit of {limit}")]
    EventSpaceTooLarge { cells: usize, limit: usize },
    #[error("observed count {observed} in a cell with zero expected count")]
    ZeroExpectedNonzeroObserved { observed: u64 },
    #[error("k = {k} is too large for exhaustive mapping search (max {max})")]
    KTooLarge { k: usize, max: usize },
    #[error("label {label} is out of range for k = {k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("learner failed on fold {fold}: {source}")]
    LearnerFailure { fold: usize, source: Box<Error> },
    #[error("training size {size} exceeds the available training rows ({available})")]
    SizeTooLarge { size: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
