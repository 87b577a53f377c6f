//! Minimal reverse-mode automatic differentiation for the localization and
//! discriminator networks.
//!
//! Everything numeric is generic over [`Scalar`]; training uses `f32` and the
//! gradient checks replay identical graphs in `f64`.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod exec;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod loss;
pub mod param;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use error::{GradError, Result};
pub use exec::{Executor, GradRequest, Gradients, Seed};
pub use graph::{Graph, Node, NodeId, Op};
pub use param::{Init, ParamId, ParamSet};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type ParamSet32 = ParamSet<f32>;
pub type ParamSet64 = ParamSet<f64>;
pub type Executor32 = Executor<f32>;
pub type Executor64 = Executor<f64>;
