//! Library side of the `dualsls` command-line tool.

use std::path::{Path, PathBuf};

use dualsls_core::Error;

pub mod commands;
pub mod config;
pub mod manifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Core(#[from] Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for invalid input, 3 for underdetermined data, 4 for solver
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                Error::Underdetermined { .. } => 3,
                Error::Infeasible { .. } | Error::Solver { .. } | Error::Unstable(_) => 4,
                Error::Dimension(_)
                | Error::Contract(_)
                | Error::InvalidResponse(_)
                | Error::Bilinear
                | Error::Validation(_)
                | Error::Csv(_)
                | Error::Io(_) => 2,
            },
        }
    }
}
