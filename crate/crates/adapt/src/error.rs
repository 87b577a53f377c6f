use hlad_core::GradError;
use thiserror::Error;

use crate::model::Level;

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("discriminator level {0:?} is not configured")]
    LevelNotConfigured(Level),
    #[error("dataset/method mismatch: {0}")]
    DatasetMismatch(String),
    #[error("dataset {0} has no labels")]
    MissingLabels(String),
    #[error("empty history")]
    EmptyHistory,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
}

pub type Result<T, E = AdaptError> = std::result::Result<T, E>;
