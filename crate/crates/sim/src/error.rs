use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid room config: {0}")]
    InvalidRoom(String),
    #[error("source count must be 1 or 2, got {0}")]
    SourceCount(usize),
    #[error("could not place {n_sources} sources at least {min_distance} m apart after {attempts} attempts")]
    RejectionBudget { n_sources: usize, min_distance: f64, attempts: usize },
    #[error("signal too short: need {needed} samples, got {actual}")]
    SignalTooShort { needed: usize, actual: usize },
    #[error("expected {expected} source signals, got {actual}")]
    SignalCount { expected: usize, actual: usize },
    #[error("clip shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
