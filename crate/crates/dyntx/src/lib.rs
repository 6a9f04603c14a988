//! dyntx: transfer the temporal dynamics of a source video onto a single
//! target image with a conditional GAN.
//!
//! The crate is organized around the pipeline stages:
//! - [`data`]: synthetic moving-shapes corpus, frame-directory I/O, pair sampling
//! - [`encoders`]: appearance encoding and the dynamics encodings (including
//!   appearance suppression by reference-frame feature differencing)
//! - [`generator`]: recurrent frame synthesis from (appearance, dynamics)
//! - [`discriminators`]: per-frame spatial adversary and whole-sequence
//!   temporal adversary
//! - [`training`]: adversarial loop, Adam, checkpointing
//! - [`eval`]: transfer metrics, encoding ablation, dynamics heatmaps
//! - [`cli`]: the `dyntx` command-line entry point

pub mod cli;
pub mod data;
pub mod discriminators;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod generator;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
