use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum DriftError {
    #[error("sample needs at least {required} values, got {actual}")]
    InsufficientSample { required: usize, actual: usize },

    #[error("non-finite value {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("empty batch {batch_index}")]
    EmptyBatch { batch_index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector in cosine distance")]
    ZeroVector,

    #[error("vector cannot be normalized to a probability distribution")]
    NonNormalizable,

    #[error("series of length {len} is shorter than the required {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("no critical value for t = {t} (table covers {t_min}..={t_max})")]
    ThresholdMissing { t: usize, t_min: usize, t_max: usize },

    #[error("threshold table does not match detector: {0}")]
    TableMismatch(String),

    #[error("threshold table checksum mismatch (expected {expected}, found {found})")]
    ChecksumMismatch { expected: String, found: String },

    #[error(
        "calibration starved at t = {t}: {survivors} surviving streams, need {required}; raise replications"
    )]
    Starvation { t: usize, survivors: usize, required: usize },

    #[error("contamination schedule has {available} entries, {required} needed")]
    ScheduleTooShort { required: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = DriftError> = std::result::Result<T, E>;

impl DriftError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        DriftError::InvalidConfig(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        DriftError::Format {
            path: path.into(),
            message: msg.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DriftError::Io {
            path: path.into(),
            source,
        }
    }
}
