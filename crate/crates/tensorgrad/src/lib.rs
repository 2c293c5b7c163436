//! Dense multi-dimensional `f64` tensors with reverse-mode automatic
//! differentiation, plus the neural layers the fusion network is built from
//! (linear, 1-D convolution, LSTM, layer norm, softmax, multi-head attention).
//!
//! The design is a single-owner computation graph: a [`Graph`] is an arena of
//! [`Tensor`] nodes appended in topological order during the forward pass.
//! [`Graph::backward`] replays the recorded operations in reverse and fills in
//! exact adjoints. A graph is confined to one execution context for the
//! duration of a forward/backward pass; independent graphs may run in
//! parallel.

mod check;
mod graph;
mod kernels;
pub mod nn;

pub use check::grad_check;
pub use graph::{Graph, Op, Padding, Tensor, TensorId};

use thiserror::Error;

/// Errors produced while building or differentiating a graph.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("data length {got} does not match shape {shape:?} (expected {expected})")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("axis {axis} is out of range for rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("{op}: expected a scalar, got shape {shape:?}")]
    NotScalar {
        op: &'static str,
        shape: Vec<usize>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}
