//! Classical two-step baselines: ASD and AMF built on a whitening covariance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, complement_projector, orthogonal_projector, ComplexMatrix, ComplexVector, HermitianPd};
use crate::model::stack_columns;

/// Denominators below this fraction of `‖ỹ‖²` are treated as zero.
const DEGENERATE_ENERGY: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorId {
    Asd,
    Amf,
    AmfKnown,
    #[serde(rename = "hetero")]
    HeteroGlrt,
}

impl DetectorId {
    pub const ALL: [DetectorId; 4] = [
        DetectorId::Amf,
        DetectorId::Asd,
        DetectorId::HeteroGlrt,
        DetectorId::AmfKnown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorId::Asd => "asd",
            DetectorId::Amf => "amf",
            DetectorId::AmfKnown => "amf_known",
            DetectorId::HeteroGlrt => "hetero",
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asd" => Ok(DetectorId::Asd),
            "amf" => Ok(DetectorId::Amf),
            "amf_known" => Ok(DetectorId::AmfKnown),
            "hetero" | "hetero_glrt" => Ok(DetectorId::HeteroGlrt),
            _ => Err(Error::UnknownDetector(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorOutput {
    pub statistic: f64,
    pub detector_id: DetectorId,
}

/// Data, signal and interference bases whitened by `S^{-1/2}`.
struct Whitened {
    y: ComplexVector,
    h: ComplexMatrix,
    b: ComplexMatrix,
}

impl Whitened {
    fn new(y: &ComplexVector, h: &ComplexMatrix, b: &ComplexMatrix, s: &HermitianPd) -> Result<Self> {
        let n = s.dim();
        for got in [y.len(), h.nrows(), b.nrows()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        let w = linalg::inv_sqrt(s)?;
        Ok(Self {
            y: &w * y,
            h: &w * h,
            b: &w * b,
        })
    }

    fn energy(&self) -> f64 {
        self.y.norm_squared()
    }
}

/// `ỹ†P_{B̃⊥}P_{H̃}P_{B̃⊥}ỹ / ỹ†P_{B̃⊥}ỹ`.
pub fn asd_statistic(
    y: &ComplexVector,
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    s: &HermitianPd,
) -> Result<f64> {
    let w = Whitened::new(y, h, b, s)?;
    let b_perp = complement_projector(&w.b)?;
    let p_h = orthogonal_projector(&w.h)?;
    let denominator = linalg::quad_form(&w.y, &b_perp);
    if denominator < DEGENERATE_ENERGY * w.energy() {
        return Err(Error::InInterferenceSubspace);
    }
    let sandwich = &b_perp * p_h * &b_perp;
    Ok(linalg::quad_form(&w.y, &sandwich) / denominator)
}

/// `ỹ†P_{B̃⊥}ỹ / ỹ†P_{C̃⊥}ỹ` with `C = [H, B]`.
pub fn amf_statistic(
    y: &ComplexVector,
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    s: &HermitianPd,
) -> Result<f64> {
    let w = Whitened::new(y, h, b, s)?;
    let b_perp = complement_projector(&w.b)?;
    let c_perp = complement_projector(&stack_columns(&w.h, &w.b))?;
    let denominator = linalg::quad_form(&w.y, &c_perp);
    if denominator < DEGENERATE_ENERGY * w.energy() {
        return Err(Error::InSpanOfC);
    }
    Ok(linalg::quad_form(&w.y, &b_perp) / denominator)
}

/// AMF whitened by the true test covariance `σ²R`.
pub fn amf_known(
    y: &ComplexVector,
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    true_cov: &HermitianPd,
) -> Result<f64> {
    amf_statistic(y, h, b, true_cov)
}
