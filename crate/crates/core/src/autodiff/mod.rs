//! Minimal dense-tensor computation with reverse-mode differentiation.
//!
//! The layer catalog is closed: linear, conv2d, transposed conv2d, group
//! normalization, a smooth self-gated nonlinearity, per-channel affine
//! conditioning (FiLM), residual add, spatial mean-pool, concatenate, and an
//! MSE loss node. Graphs are static layer lists built with [`GraphBuilder`];
//! every backward pass is hand-written and checked against central finite
//! differences in the tests.

mod adam;
mod conv;
mod graph;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Graph, GraphBuilder, NodeId, Op};
pub use tensor::{Scalar, Tensor, TensorG};
