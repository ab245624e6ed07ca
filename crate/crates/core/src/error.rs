use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FimError>;

#[derive(Debug, Error)]
pub enum FimError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Input is well formed but violates a structural rule (self-loop, bad probability, odd population...).
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown node {0}")]
    UnknownNode(u64),

    #[error("{0} node(s) have no group, first is {1}")]
    Coverage(usize, u64),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("internal invariant breached: {0}")]
    Invariant(String),
}

impl FimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            FimError::Parse { .. }
            | FimError::Validation(_)
            | FimError::UnknownNode(_)
            | FimError::Coverage(..)
            | FimError::Contract(_)
            | FimError::Json(_) => 1,
            FimError::Io { .. } | FimError::Csv(_) => 2,
            FimError::Invariant(_) => 3,
        }
    }
}
