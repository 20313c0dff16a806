use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation interval ({lower}, {upper}) has negligible normal mass")]
    Underflow { lower: f64, upper: f64 },

    #[error("matrix is not positive definite: leading minor {minor} failed")]
    NotPositiveDefinite { minor: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical failure for subject {subject}: {message}")]
    Numerical { subject: usize, message: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Json(_) | Error::Csv(_) | Error::Config(_) => 2,
            Error::Underflow { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::Numerical { .. }
            | Error::Domain(_) => 3,
            Error::DegenerateFit(_) => 4,
            Error::InvalidParameter(_) | Error::InvalidState(_) | Error::Shape(_) => 5,
            Error::Io { .. } => 1,
        }
    }
}
