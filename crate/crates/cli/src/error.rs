use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(refltomo::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    File(refltomo::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad configuration, 2 for solver failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io { .. } | CliError::File(_) => 3,
        }
    }
}

impl From<refltomo::Error> for CliError {
    fn from(e: refltomo::Error) -> Self {
        use refltomo::Error as E;
        match e {
            E::InvalidInput(_) | E::ShapeMismatch { .. } => CliError::Config(e.to_string()),
            E::Io { .. } | E::Format { .. } => CliError::File(e),
            _ => CliError::Solver(e),
        }
    }
}
