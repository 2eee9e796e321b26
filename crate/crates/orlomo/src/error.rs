use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, reported with the offending field path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numeric failure at iteration {iteration}: {detail}")]
    NumericFailure { iteration: usize, detail: String },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("unsupported algorithm for this operation: {0}")]
    Unsupported(String),

    #[error("corrupt trace: {0}")]
    TraceCorruption(String),

    #[error("insufficient diagnostics: {0}")]
    InsufficientDiagnostics(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
