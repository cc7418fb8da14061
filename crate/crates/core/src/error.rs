use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("agent index {index} out of range for a graph with {n} agents")]
    InvalidAgent { index: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("subset space too large for exhaustive search: {free} free agents (limit {limit})")]
    Capacity { free: usize, limit: usize },

    #[error("reference table has {len} entries, tau {tau} is out of range")]
    Range { tau: u64, len: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("scenario error at `{key}`: {message}")]
    Schema { key: String, message: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
