use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite gradient from sample {index}")]
    NonFiniteGradient { index: usize },

    #[error("non-finite update at step {step}")]
    NonFiniteUpdate { step: usize },

    #[error("empty mini-batch")]
    EmptyBatch,

    #[error("sample index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} {value} out of range [{lo}, {hi})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("schedule inequality violated: {0}")]
    ScheduleInequality(String),

    #[error("empty admissible interval: {0}")]
    EmptyWindow(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a bad configuration rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::Json(_)
                | Error::DimensionMismatch { .. }
                | Error::EmptyWindow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
