use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A toolkit failure, tagged with the module and operation that raised it.
    #[error("{module}::{op}: {source}")]
    Core {
        module: &'static str,
        op: &'static str,
        #[source]
        source: epifuse::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {msg}", path.display())]
    File { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Core {
                source: epifuse::Error::Config(_),
                ..
            } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Tags core errors with the module and operation that raised them.
pub trait Context<T> {
    fn ctx(self, module: &'static str, op: &'static str) -> Result<T>;
}

impl<T> Context<T> for epifuse::Result<T> {
    fn ctx(self, module: &'static str, op: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Core { module, op, source })
    }
}

pub fn file_error(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> CliError {
    CliError::File {
        path: path.into(),
        msg: err.to_string(),
    }
}
