use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Every variant carries enough context (module, operation, row, day or file)
/// for a command-line user to locate the failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: row {row}: {msg}")]
    Parse { path: PathBuf, row: usize, msg: String },

    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },

    #[error("data: {0}")]
    Data(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("{op}: {msg}")]
    Precondition { op: &'static str, msg: String },

    #[error("date misalignment: {0}")]
    Alignment(String),

    #[error("filter divergence: {0}")]
    FilterDivergence(String),

    #[error("assimilation failed at day {day}: {source}")]
    FilterStep {
        day: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Precondition { op, msg: msg.into() }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::File {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
