use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration file is unreadable or malformed.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] bouss1d::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for configuration problems, 3 for numerical failures, 1 for output.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Model(bouss1d::Error::Config { .. }) => 2,
            CliError::Model(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
