//! Minimal dense numerical engine: matrices, layers, loss, optimizer and a
//! finite-difference gradient oracle. All arithmetic is `f64`.

pub mod gradcheck;
pub mod layers;
pub mod loss;
mod matrix;
pub mod module;
pub mod optim;

pub use layers::{activation, sigmoid, Activation, BatchNorm, Linear};
pub use matrix::Matrix;
pub use module::{Module, Param, Tensor, TensorMut};
