use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("row {row} has zero norm")]
    ZeroNorm { row: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("dataset has no true labels")]
    MissingTrueLabels,

    #[error("dataset has no verified mask")]
    MissingVerifiedMask,

    #[error("label {label} at index {index} is out of range for {classes} classes")]
    LabelOutOfRange { index: usize, label: i64, classes: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("epoch {epoch}, {phase}: {source}")]
    Phase {
        epoch: usize,
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_phase(self, epoch: usize, phase: &'static str) -> Self {
        Error::Phase {
            epoch,
            phase,
            source: Box::new(self),
        }
    }

    /// Innermost error, unwrapping epoch/phase context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            other => other,
        }
    }
}
