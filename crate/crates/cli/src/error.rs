use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

/// Command failure, tagged with the pipeline stage it occurred in.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{stage}: {}: {message}", path.display())]
    Format {
        stage: &'static str,
        path: PathBuf,
        message: String,
    },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

impl CliError {
    /// 1 usage/config, 2 I/O or file format, 3 pipeline stage failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Format { .. } => 2,
            CliError::Stage { .. } => 3,
        }
    }

    pub fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        CliError::Stage { stage, message: err.to_string() }
    }

    pub fn io(stage: &'static str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { stage, path: path.into(), source }
    }

    pub fn format(stage: &'static str, path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        CliError::Format { stage, path: path.into(), message: message.to_string() }
    }
}
