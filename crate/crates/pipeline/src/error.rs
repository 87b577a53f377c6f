use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("dataset format: {0}")]
    Format(String),
    #[error("dataset truncated or padded: header implies {expected} bytes, file has {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("{path}:{line}:{column}: {message}")]
    Manifest { path: String, line: usize, column: usize, message: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("incompatible runs: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Adapt(#[from] hlad_adapt::AdaptError),
    #[error(transparent)]
    Sim(#[from] hlad_sim::SimError),
    #[error(transparent)]
    Grad(#[from] hlad_core::GradError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| PipelineError::Io { path: path.into(), source })
    }
}
