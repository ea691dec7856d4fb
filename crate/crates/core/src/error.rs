use std::path::PathBuf;

use crate::gridmap::Cell;

/// Errors raised across the exploration stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid map: {0}")]
    Validation(String),

    /// A documented precondition of an operation was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("goal {goal:?} is unreachable from {start:?}")]
    Unreachable { start: Cell, goal: Cell },

    #[error("no valid start pose: {0}")]
    Setup(String),

    #[error("training fault: {0}")]
    TrainingFault(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
