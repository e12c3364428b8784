use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke the precondition of an operation.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The exhaustive search would enumerate more candidates than allowed.
    #[error("exhaustive search over {candidates} candidates exceeds the limit of {limit}")]
    SearchSpace { candidates: u128, limit: u128 },

    /// A statistic is undefined for the given input.
    #[error("undefined: {0}")]
    Undefined(&'static str),

    /// A sweep point failed.
    #[error("sweep point {axis}={value}: {source}")]
    Sweep {
        axis: String,
        value: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
