//! Robust adaptive beamforming by reduced-sector covariance reconstruction.
//!
//! The processing chain estimates interferer directions from the snapshot
//! block, samples a maximum-entropy spatial spectrum only inside small
//! sectors around them to rebuild the interference-plus-noise covariance,
//! estimates the desired-signal steering vector from the same spectrum over
//! the look sector, and solves for MVDR weights with a matrix-free
//! Polak-Ribiere-Polyak conjugate gradient.
//!
//! [`pipeline::run_pipeline`] wires every stage together; [`experiment`]
//! holds the Monte Carlo harness and the analytical validation report.

pub mod cg;
pub mod doa;
pub mod error;
pub mod experiment;
pub mod export;
pub mod geometry;
pub mod inc;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod quadrature;
pub mod rng;
pub mod scene;
pub mod spectrum;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
