//! Adaptive subspace detection when the test cell's noise covariance drifts
//! away from the training data.
//!
//! The crate provides:
//!
//! * [`linalg`]: Hermitian helpers (projectors, whitening, PD repair).
//! * [`model`]: steering-vector subspaces, covariance families and dataset
//!   generation under both hypotheses.
//! * [`detectors`]: the ASD and AMF baselines, plus the clairvoyant AMF.
//! * [`hetero_glrt`]: the constrained GLRT whose test covariance is estimated
//!   by ADMM inside a Frobenius ball around the training covariance.
//! * [`experiments`]: the Monte Carlo engine, scenario presets and ROC tools.
//! * [`cli`]: config parsing and CSV/JSON campaign outputs.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detectors;
pub mod error;
pub mod experiments;
pub mod hetero_glrt;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, HermitianPd};
