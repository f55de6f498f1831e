//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.

mod adam;
mod check;
mod graph;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use check::grad_check;
pub use graph::{Graph, Var, LEAKY_SLOPE, LOG_EPS};
pub use tensor::Tensor;
