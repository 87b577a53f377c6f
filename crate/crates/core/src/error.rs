use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum GradError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("non-finite value produced by node {node:?} ({op})")]
    NonFinite { node: NodeId, op: &'static str },
    #[error("graph expects {expected} inputs, got {actual}")]
    InputCount { expected: usize, actual: usize },
    #[error("backward called before forward")]
    NotForwarded,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GradError> = std::result::Result<T, E>;
