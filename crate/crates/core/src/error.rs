use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum CadError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error at byte {offset}: {msg}")]
    Parse {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("{path}: incompatible format version {found} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Generation(String),
}

impl CadError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        CadError::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CadError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CadError>;
