use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("invalid value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },

    #[error("unknown config key {0:?}")]
    UnknownKey(String),

    #[error("no such file: {}", .0.display())]
    MissingPath(PathBuf),

    #[error("unknown task {task:?}; valid tasks: {valid}")]
    UnknownTask { task: String, valid: String },

    #[error("{failed} of {total} oracle checks failed")]
    OracleFailed { failed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] iedl::Error),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for anything wrong with the invocation, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::ConfigSyntax { .. }
            | CliError::BadValue { .. }
            | CliError::UnknownKey(_)
            | CliError::MissingPath(_)
            | CliError::UnknownTask { .. } => 2,
            CliError::OracleFailed { .. } | CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
