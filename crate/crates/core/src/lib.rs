//! Insole pressure + IMU to 3D skeleton regression.
//!
//! Pipeline stages, in data-flow order:
//!
//! - [`ingest`]: CSV parsing and ADC calibration
//! - [`preprocess`]: gap handling, filtering, resampling, normalization,
//!   derivative features, synchronization and windowing
//! - [`model`]: the transformer encoder regressor and checkpoints
//! - [`train`]: loss, AdamW, plateau scheduling, splitting and the fit loop
//! - [`eval`]: per-joint errors and report tables
//! - [`synth`]: a deterministic synthetic dataset generator
//!
//! [`numerics`] provides the tensor and autodiff substrate, [`types`] the
//! shared vocabulary, and [`cli`] the command-line front end.

pub mod cli;
pub mod digest;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod numerics;
pub mod preprocess;
pub mod synth;
pub mod train;
pub mod types;

pub use error::{Error, Result};
