use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("optimizer error: non-finite gradient in parameter `{param}`")]
    Optimizer { param: String },

    #[error("unmapped label `{label}` from source `{source_name}`")]
    UnmappedLabel { label: String, source_name: String },

    #[error("unknown source dataset `{0}`")]
    UnknownSource(String),

    #[error("degenerate class weights: class `{0}` has zero count")]
    DegenerateClass(String),

    #[error("utterance `{id}` is too short for a single frame ({duration} s)")]
    EmptyUtterance { id: String, duration: f64 },

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("alignment error: {what} ({left} vs {right})")]
    Alignment {
        what: String,
        left: f64,
        right: f64,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("infeasible CTC alignment: {frames} frames cannot emit a target needing {required}")]
    InfeasibleAlignment { frames: usize, required: usize },

    #[error("empty timeline over a positive duration ({0} s)")]
    EmptyTimeline(f64),

    #[error("timeline validation failed: {0}")]
    Validation(String),

    #[error("non-finite loss at {0}")]
    NonFiniteLoss(String),

    #[error("file format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("cannot access {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}
