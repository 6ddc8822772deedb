//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: header does not match schema '{schema}': {detail}")]
    HeaderMismatch {
        path: PathBuf,
        schema: String,
        detail: String,
    },

    #[error("{path}: row {row}: {detail}")]
    BadRow {
        path: PathBuf,
        /// 1-based data row number (header excluded).
        row: usize,
        detail: String,
    },

    #[error("unrecognized label '{label}' (row {row})")]
    UnrecognizedLabel { label: String, row: usize },

    #[error("column '{column}' is entirely non-finite")]
    NonFiniteColumn { column: String },

    #[error("no features exceed significance threshold {threshold}")]
    NoFeaturesSelected { threshold: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("feature names differ between model and data: {detail}")]
    FeatureMismatch { detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported document version {found} (expected {expected})")]
    BadVersion { found: u32, expected: u32 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
