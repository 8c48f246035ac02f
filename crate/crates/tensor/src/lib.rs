//! Dense `f64` matrices and a reverse-mode tape with higher-order gradients.
//!
//! The tape records every operation on a [`Graph`]. Calling [`Graph::grad`]
//! appends the backward pass as more operations, so gradients can be
//! differentiated again (needed for penalties on input gradients).

mod graph;
mod mat;
mod optim;

pub use graph::{Graph, Var, GATHER_ZERO, LN_FLOOR};
pub use mat::Mat;
pub use optim::{Adam, AdamConfig};
