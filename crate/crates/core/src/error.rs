use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, expected {expected}, got {actual}")]
    Dimension {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("{op}: index {index} out of range 0..{len}")]
    Index {
        op: &'static str,
        index: usize,
        len: usize,
    },

    #[error("{0}")]
    Usage(String),

    #[error("parse error in {source_name} at byte {offset}: {reason}")]
    Parse {
        source_name: String,
        offset: usize,
        reason: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("aggregation error: upload from client {client}: {reason}")]
    Aggregation { client: usize, reason: String },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("config error: key `{key}`: {constraint}")]
    Config { key: String, constraint: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("round {round}: {source}")]
    Round {
        round: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
