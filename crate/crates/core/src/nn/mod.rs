//! Minimal deterministic CNN substrate.
//!
//! Tensors are 4-D, laid out `[batch, height, width, channels]` (NHWC) and
//! stored row-major. Networks are static layer graphs built once with
//! [`GraphBuilder`]; a training forward pass records a tape that
//! [`Network::backward`] consumes to produce parameter and input gradients.
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for finite-difference checks.

mod adam;
pub mod checkpoint;
mod graph;
pub mod layers;
mod scalar;
mod tensor;

pub use adam::AdamState;
pub use graph::{Gradients, Graph, GraphBuilder, Network, NodeId, ParamInfo, ParamKind};
pub use layers::{layer_forward, LayerKind, LayerParams, LayerSpec, Mode};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Slope of the leaky ReLU used throughout the architectures.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Running-statistics momentum of batch normalization.
pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-5;
