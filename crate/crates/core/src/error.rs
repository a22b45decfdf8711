use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular Gram matrix (condition number {condition:.3e})")]
    SingularGram { condition: f64 },

    #[error("not positive definite: smallest eigenvalue {min_eigenvalue:.3e} below floor {floor:.3e}")]
    NotPositiveDefinite { min_eigenvalue: f64, floor: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("test vector lies in interference subspace")]
    InInterferenceSubspace,

    #[error("test vector lies in span of C")]
    InSpanOfC,

    #[error("insufficient secondary data: {0}")]
    InsufficientSecondaryData(String),

    #[error("ADMM diverged; reduce eta (‖R‖_F = {norm:.3e} at iteration {iteration})")]
    AdmmDiverged { norm: f64, iteration: usize },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown detector `{0}`")]
    UnknownDetector(String),

    #[error("{detector} on {scenario}: {failures} of {trials} trials failed (limit 1%)")]
    TooManyFailures {
        detector: String,
        scenario: String,
        failures: usize,
        trials: usize,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
