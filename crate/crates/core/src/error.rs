use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ensemble parameters: {0}")]
    InvalidParams(String),

    #[error("input contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("row span has dimension {rank}, expected {expected}; unit normal is not unique")]
    Corank { rank: usize, expected: usize },

    #[error("vector is not unit length (norm {0})")]
    NonUnit(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cost guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("parity violation: p + q = {sum} but n/2 = {half}")]
    Parity { sum: usize, half: usize },

    #[error("difference vector is zero; CLCD direction undefined")]
    ZeroDirection,

    #[error("separated subsets not found")]
    NotFound,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
