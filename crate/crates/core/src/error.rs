use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("divergence at step {step}: {what}")]
    Divergence { step: usize, what: String },

    #[error("system is not observable: {0}")]
    NotObservable(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code category used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Dimension(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::Divergence { .. } => 4,
            Error::NotObservable(_) | Error::Degenerate(_) | Error::Numerical(_) => 5,
        }
    }
}
