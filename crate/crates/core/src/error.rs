use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: non-finite value at line {line}, column {column}")]
    NonFinite {
        path: PathBuf,
        line: usize,
        column: usize,
    },

    #[error("{0}: file contains no objects")]
    EmptyFile(PathBuf),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("column {column} has zero standard deviation")]
    ConstantColumn { column: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class {class} has {count} member(s), need at least {needed}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("index {index} out of range for {len} objects")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("linear system is singular; use lambda > 0")]
    SingularSystem,

    #[error("skewness undefined: counts have zero variance")]
    ZeroVariance,

    #[error("{0}")]
    Construction(String),

    #[error("unsupported document version {0}")]
    Version(u32),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
