use thiserror::Error;

/// Errors produced by parsing, preprocessing, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A data row could not be parsed. Carries the 1-based line number.
    #[error("line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },

    /// The log file as a whole is unusable (e.g. no `#fields` header).
    #[error("invalid log: {0}")]
    InvalidLog(String),

    /// A precondition on the input data does not hold.
    #[error("{0}")]
    InvalidInput(String),

    /// A model configuration is out of its valid range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
