use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the transport library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid stopping model: {0}")]
    Stopping(String),

    #[error("range table: {0}")]
    Table(String),

    #[error("invalid angular setup: {0}")]
    Angular(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("divergent iteration: {0}")]
    Divergent(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {msg}")]
    Csv { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 1 for bad input, 2 for numerical failure, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Grid(_)
            | Error::Stopping(_)
            | Error::Table(_)
            | Error::Angular(_)
            | Error::Input(_)
            | Error::Config { .. } => 1,
            Error::Shape(_) | Error::NonFinite(_) | Error::Divergent(_) => 2,
            Error::Io { .. } | Error::Csv { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
