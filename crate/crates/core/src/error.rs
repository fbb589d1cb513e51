use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped loosely by the stage that raises them; the CLI maps
/// every variant to a single-line JSON diagnostic using [`Error::kind`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- data io ---
    #[error("{path}: not an EMB1 container (bad magic bytes)")]
    MagicMismatch { path: PathBuf },
    #[error("{context}: expected {expected} values per row, found {found}")]
    DimMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("duplicate row id {0:?}")]
    DuplicateRowId(String),
    #[error("invalid row id {0:?}: ids must be non-empty and must not contain NUL")]
    InvalidRowId(String),
    #[error("truncated container: {0}")]
    Truncated(String),
    #[error("line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
    #[error("line {line}: unknown split {value:?}")]
    UnknownSplit { line: usize, value: String },
    #[error("no training records")]
    EmptyTrainingSet,
    #[error("inconsistent taxonomy: {0}")]
    InconsistentTaxonomy(String),
    #[error("training record {0:?} lacks family/genus/species")]
    IncompleteTaxonomy(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("io failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // --- sampling / augment ---
    #[error("class index {index} out of range for {classes} classes")]
    UnknownClassIndex { index: usize, classes: usize },
    #[error("mixup alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("empty batch")]
    EmptyBatch,

    // --- model / optim ---
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite output in {0}")]
    NonFiniteOutput(&'static str),
    #[error("target {target} out of range for {classes} classes")]
    IndexOutOfRange { target: usize, classes: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    DivergedLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("record {observation_id:?} lacks labels for objective {objective}")]
    MissingObjectiveLabels {
        observation_id: String,
        objective: &'static str,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    // --- eval ---
    #[error("prediction set has no true labels")]
    MissingLabels,
    #[error("k = {k} out of range for {classes} classes")]
    KOutOfRange { k: usize, classes: usize },
    #[error("run {run:?} failed: {source}")]
    Run {
        run: String,
        #[source]
        source: Box<Error>,
    },

    // --- zero-shot ---
    #[error("response rejected: {valid} of {total} items matched a candidate")]
    RejectedResponse { valid: usize, total: usize },
    #[error("{class_type} round exhausted {attempts} attempts")]
    ExhaustedRetries {
        class_type: &'static str,
        attempts: usize,
    },
    #[error("transport failure: {0}")]
    TransportFailure(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn csv(path: &std::path::Path, e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                _ => unreachable!(),
            }
        } else {
            Error::Csv(e)
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable, machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MagicMismatch { .. } => "MagicMismatch",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::DuplicateRowId(_) => "DuplicateRowId",
            Error::InvalidRowId(_) => "InvalidRowId",
            Error::Truncated(_) => "Truncated",
            Error::SchemaViolation { .. } => "SchemaViolation",
            Error::UnknownSplit { .. } => "UnknownSplit",
            Error::EmptyTrainingSet => "EmptyTrainingSet",
            Error::InconsistentTaxonomy(_) => "InconsistentTaxonomy",
            Error::IncompleteTaxonomy(_) => "IncompleteTaxonomy",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Io { .. } => "IoFailure",
            Error::UnknownClassIndex { .. } => "UnknownClassIndex",
            Error::NonPositiveAlpha(_) => "NonPositiveAlpha",
            Error::EmptyBatch => "EmptyBatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFiniteOutput(_) => "NonFiniteOutput",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::EmptyDataset => "EmptyDataset",
            Error::DivergedLoss { .. } => "DivergedLoss",
            Error::MissingObjectiveLabels { .. } => "MissingObjectiveLabels",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Checkpoint(_) => "Checkpoint",
            Error::MissingLabels => "MissingLabels",
            Error::KOutOfRange { .. } => "KOutOfRange",
            Error::Run { source, .. } => source.kind(),
            Error::RejectedResponse { .. } => "RejectedResponse",
            Error::ExhaustedRetries { .. } => "ExhaustedRetries",
            Error::TransportFailure(_) => "TransportFailure",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
