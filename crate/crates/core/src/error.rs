use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("rule system has no rules")]
    NoRules,

    #[error("undefined direction: the two centers coincide")]
    UndefinedDirection,

    #[error("invalid hyper-parameter: {0}")]
    InvalidHyperParams(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-numeric feature at line {line}, column {column}: {value:?}")]
    NonNumeric { line: usize, column: usize, value: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trace mismatch: {0}")]
    TraceMismatch(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
