use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}:{column}: {message}")]
    Validation {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{asset} model is infeasible: {reason}")]
    ModelInfeasible { asset: String, reason: String },

    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),

    #[error("schema version mismatch in {path}: expected {expected}, found {found}")]
    SchemaVersion {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn infeasible(asset: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ModelInfeasible {
            asset: asset.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
