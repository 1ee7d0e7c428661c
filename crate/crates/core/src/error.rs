//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("unknown label {0:?} (not in the supplied vocabulary)")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("class {class} has {available} training examples, need {needed}")]
    ClassTooSmall {
        class: usize,
        available: usize,
        needed: usize,
    },

    #[error("class {0} has no actual examples in the evaluated split")]
    EmptyClassRow(usize),

    #[error("confusion matrix has all zero counts")]
    EmptyConfusion,

    #[error("per-class counts sum to zero")]
    ZeroCountTotal,

    #[error("cannot evaluate on an empty dataset")]
    EmptyDataset,

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },

    #[error("non-finite loss at iteration {iteration} (supervised {supervised}, unsupervised {unsupervised})")]
    NonFiniteLoss {
        iteration: u64,
        supervised: f64,
        unsupervised: f64,
    },

    #[error("oracle strategy requires a hidden true label for example {id}")]
    MissingHiddenLabel { id: u64 },

    #[error("config key {key:?}: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("no results: {0}")]
    EmptyResults(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Usage-class errors (bad config / bad invocation) map to exit code 1;
    /// everything else is a run failure (exit code 2).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
