use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside the domain the operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested operation is not defined for this model/response setup.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A caller-side precondition was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A dense object would exceed the configured size cap.
    #[error("size error: {what} = {size} exceeds cap {cap}")]
    Size { what: String, size: u128, cap: u128 },

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("singular design for item {item}: {message}")]
    Singular { item: usize, message: String },

    #[error("sampler fault at iteration {iteration}: {message}")]
    SamplerFault { iteration: usize, message: String },

    #[error("inconsistent partitions: {0}")]
    Inconsistent(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed command-line or config usage (unknown format flag etc.).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        source_name: impl Into<String>,
        line: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}
