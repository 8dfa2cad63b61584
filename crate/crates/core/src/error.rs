use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the recovery toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("infeasible adversary: {0}")]
    InfeasibleAdversary(String),

    #[error("pairwise differencing needs an even sample count, got {0}")]
    OddSampleCount(usize),

    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("corruption fraction {0} is too large")]
    EpsilonTooLarge(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("malformed dataset container: {0}")]
    Container(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration rather than by
    /// a failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidConfig(_) | Error::EpsilonTooLarge(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
