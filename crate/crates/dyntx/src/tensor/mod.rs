//! Minimal tensor/autodiff engine backing every network in this crate.

pub mod check;
pub mod kernels;
mod ops;
mod scalar;
mod var;

pub use ops::concat;
pub use scalar::{Dtype, Scalar};
pub use var::Var;
