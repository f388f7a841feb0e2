use thiserror::Error;

/// Errors produced anywhere in the obfugraph pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: invalid record: {}", violations.join("; "))]
    Validation { line: usize, violations: Vec<String> },

    #[error("line {line}: duplicate function_id {id:?}")]
    DuplicateFunctionId { line: usize, id: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown feature scheme {0:?}")]
    UnknownScheme(String),

    #[error("scheme {scheme} requires {what}")]
    MissingContext { scheme: String, what: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("cannot resolve base function for group {0}")]
    UnresolvedGroup(String),

    #[error("projects listed for both train and test: {}", .0.join(", "))]
    OverlappingProjects(Vec<String>),

    #[error("unknown project {0:?}")]
    UnknownProject(String),

    #[error("{0}")]
    EmptyProjects(String),

    #[error("taxonomy line {line}: {message}")]
    Taxonomy { line: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training fault at epoch {epoch}, batch {batch}: {reason}")]
    TrainingFault {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error("no eligible samples: {0}")]
    EmptyEvaluation(String),

    #[error("not implemented: {0}")]
    Unimplemented(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
