// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod container;
pub mod datasets;
pub mod error;
pub mod geometry;
pub mod hgan;
pub mod nn;
pub mod optimizer;
pub mod parallel;
pub mod rng;
pub mod studies;
pub mod uq;

pub use error::{Error, Result};
