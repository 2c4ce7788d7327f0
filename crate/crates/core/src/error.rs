//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the benchmarking engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Two parameter vectors that must share segment structure do not.
    #[error("segment structure mismatch: expected {expected}, got {actual}")]
    Structure { expected: String, actual: String },

    /// An update produced a NaN or infinite value.
    #[error("non-finite value in '{context}', segment '{segment}'")]
    Numeric { context: String, segment: String },

    /// Invalid configuration or argument value.
    #[error("config error: {0}")]
    Config(String),

    /// A precondition on an operation's inputs was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The benchmark protocol cannot proceed (missing samples, empty trial sets, ...).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Optimizer state used before initialization or with the wrong structure.
    #[error("state error: {0}")]
    State(String),

    /// Every ES perturbation pair was discarded as non-finite.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Malformed input table or record file.
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn numeric(context: impl Into<String>, segment: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            segment: segment.into(),
        }
    }
}
