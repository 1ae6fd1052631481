use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: `{key}`: {reason}")]
    Config { line: usize, key: String, reason: String },
    #[error("config: `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("output directory {0} already holds results; pass --overwrite to replace them")]
    Collision(PathBuf),
    #[error(transparent)]
    Core(#[from] nlfp::error::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Exit status: 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Invalid { .. } | CliError::Collision(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Invalid { key: key.to_string(), reason: reason.into() }
}
