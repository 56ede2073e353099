use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the localization pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty series")]
    EmptySeries,

    #[error("non-contiguous segmentation: {0}")]
    NonContiguous(String),

    #[error("rejection input must be positive-only (frame {frame} has class 0)")]
    NegativeInRejectionInput { frame: usize },

    #[error("frame index {index} out of range for {len} frames")]
    FrameOutOfRange { index: usize, len: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("state {state} out of range for {num_states} states")]
    StateOutOfRange { state: usize, num_states: usize },

    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("class id {class_id} at frame {frame} is outside 0..={max}")]
    ClassOutOfRange {
        frame: usize,
        class_id: usize,
        max: usize,
    },

    #[error("invalid posterior at frame {frame}: {reason}")]
    InvalidPosterior { frame: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class {0} has no training features")]
    MissingClass(usize),

    #[error("no valid grid cell: every (K, epsilon) pair was skipped")]
    NoValidCells,

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("ppm byte {offset}: {message}")]
    Ppm { offset: usize, message: String },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Validation failures (bad input, bad parameters) as opposed to
    /// environment failures such as I/O.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
