//! Signal/interference subspaces, covariance families and synthetic data.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    self, pd_repair_relative, ComplexMatrix, ComplexVector, HermitianPd, DEFAULT_RELATIVE_FLOOR,
};

/// Allowed deviation of a base covariance from unit Frobenius norm. The
/// presets store `0.44·I`, whose norm for `N = 5` is about 0.984.
pub const UNIT_NORM_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceSpec {
    /// Sensor count.
    pub n: usize,
    /// Signal subspace dimension.
    pub p: usize,
    /// Interference subspace dimension.
    pub t: usize,
}

impl SubspaceSpec {
    pub fn new(n: usize, p: usize, t: usize) -> Result<Self> {
        let spec = Self { n, p, t };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.t == 0 {
            return Err(invalid("p/t", "signal and interference dimensions must be ≥ 1"));
        }
        if self.p + self.t >= self.n {
            return Err(invalid(
                "n",
                format!("need p + t < n, got p={} t={} n={}", self.p, self.t, self.n),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Base covariance shared by all secondary cells.
    pub rs_base: HermitianPd,
    /// Base covariance of the cell under test.
    pub r_test: HermitianPd,
    /// Test noise power σ².
    pub sigma2_test: f64,
    /// Samples per adjacent cell, `K_j`.
    pub group_sizes: Vec<usize>,
    /// Per-cell scale `σ_j²`.
    pub group_scales: Vec<f64>,
}

impl NoiseSpec {
    pub fn total_secondary(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, m) in [("rs_base", &self.rs_base), ("r_test", &self.r_test)] {
            if m.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.dim(),
                });
            }
            let norm = m.frobenius_norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(invalid(name, format!("Frobenius norm {norm} is not ≈ 1")));
            }
        }
        if !(self.sigma2_test > 0.0) {
            return Err(invalid("sigma2_test", "must be > 0"));
        }
        if self.group_sizes.is_empty() || self.group_sizes.len() != self.group_scales.len() {
            return Err(invalid(
                "group_sizes",
                format!(
                    "{} sizes vs {} scales",
                    self.group_sizes.len(),
                    self.group_scales.len()
                ),
            ));
        }
        if self.group_sizes.contains(&0) {
            return Err(invalid("group_sizes", "every group needs at least one sample"));
        }
        if self.group_scales.iter().any(|&s| !(s > 0.0)) {
            return Err(invalid("group_scales", "scales must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Interference plus noise only.
    H0,
    /// Signal present.
    H1,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Cell under test.
    pub y: ComplexVector,
    /// Secondary vectors grouped by adjacent cell.
    pub secondary: Vec<Vec<ComplexVector>>,
    pub truth: Hypothesis,
}

impl Dataset {
    pub fn pooled_secondary(&self) -> Vec<ComplexVector> {
        self.secondary.iter().flatten().cloned().collect()
    }
}

/// `h = (1/√N)[1, e^{−j2πf}, …, e^{−j2πf(N−1)}]ᵀ`.
pub fn fourier_steering(f: f64, n: usize) -> ComplexVector {
    let scale = 1.0 / (n as f64).sqrt();
    ComplexVector::from_fn(n, |k, _| {
        Complex64::from_polar(scale, -2.0 * PI * f * k as f64)
    })
}

pub fn signal_frequency(i: usize) -> f64 {
    0.05 * i as f64 + 0.05
}

pub fn interference_frequency(i: usize) -> f64 {
    -0.025 * i as f64 + 0.025
}

/// Steering-vector bases `(H, B)`; column `i` (1-based) of `H` sits at
/// `0.05i + 0.05`, column `i` of `B` at `−0.025i + 0.025`.
pub fn build_subspaces(spec: &SubspaceSpec) -> Result<(ComplexMatrix, ComplexMatrix)> {
    spec.validate()?;
    let h_cols: Vec<_> = (1..=spec.p)
        .map(|i| fourier_steering(signal_frequency(i), spec.n))
        .collect();
    let b_cols: Vec<_> = (1..=spec.t)
        .map(|i| fourier_steering(interference_frequency(i), spec.n))
        .collect();
    let h = ComplexMatrix::from_columns(&h_cols);
    let b = ComplexMatrix::from_columns(&b_cols);
    linalg::orthogonal_projector(&stack_columns(&h, &b))?;
    Ok((h, b))
}

/// `[H, B]`.
pub fn stack_columns(h: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut c = ComplexMatrix::zeros(h.nrows(), h.ncols() + b.ncols());
    c.columns_mut(0, h.ncols()).copy_from(h);
    c.columns_mut(h.ncols(), b.ncols()).copy_from(b);
    c
}

/// Circularly symmetric complex normal `CN(mean, cov)` with a cached factor.
#[derive(Debug, Clone)]
pub struct ComplexGaussian {
    mean: ComplexVector,
    factor: ComplexMatrix,
}

impl ComplexGaussian {
    pub fn new(mean: ComplexVector, cov: &HermitianPd) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        Ok(Self {
            mean,
            factor: cov.factor(),
        })
    }

    pub fn zero_mean(cov: &HermitianPd) -> Result<Self> {
        Self::new(ComplexVector::zeros(cov.dim()), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexVector {
        let g = standard_complex_normal(rng, self.dim());
        &self.mean + &self.factor * g
    }
}

/// i.i.d. entries `(u + iv)/√2`, so `E[g g†] = I`.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexVector::from_fn(dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

pub fn sample_complex_gaussian<R: Rng + ?Sized>(
    mean: &ComplexVector,
    cov: &HermitianPd,
    rng: &mut R,
) -> Result<ComplexVector> {
    Ok(ComplexGaussian::new(mean.clone(), cov)?.sample(rng))
}

/// `(1/√p)·1`, the fixed target direction.
pub fn default_theta_direction(p: usize) -> ComplexVector {
    ComplexVector::from_element(p, Complex64::from(1.0 / (p as f64).sqrt()))
}

/// `(1/√t)·1`, the default interference coordinates.
pub fn default_phi(t: usize) -> ComplexVector {
    ComplexVector::from_element(t, Complex64::from(1.0 / (t as f64).sqrt()))
}

/// `10 log₁₀(θ† H† (σ² R)⁻¹ H θ)`.
pub fn snr_db(h: &ComplexMatrix, r_test: &HermitianPd, sigma2: f64, theta: &ComplexVector) -> f64 {
    let x = h * theta;
    let energy = linalg::quad_form(&x, &r_test.inverse()) / sigma2;
    10.0 * energy.log10()
}

/// Target coordinates along [`default_theta_direction`] with the requested SNR.
pub fn theta_for_snr(
    h: &ComplexMatrix,
    r_test: &HermitianPd,
    sigma2: f64,
    snr_db: f64,
) -> ComplexVector {
    let u = default_theta_direction(h.ncols());
    let unit_energy = linalg::quad_form(&(h * &u), &r_test.inverse()) / sigma2;
    let c = (10f64.powf(snr_db / 10.0) / unit_energy).sqrt();
    u * Complex64::from(c)
}

/// `R_ij = R_s,ij + α·decay^{|i−j|}`, renormalized to unit Frobenius norm.
/// With `alpha = 0` the base covariance is returned untouched.
pub fn heterogeneous_test_cov(rs: &HermitianPd, alpha: f64, decay: f64) -> Result<HermitianPd> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(invalid("decay", format!("{decay} not in (0, 1]")));
    }
    if alpha == 0.0 {
        return Ok(rs.clone());
    }
    let n = rs.dim();
    let bump = ComplexMatrix::from_fn(n, n, |i, j| {
        Complex64::from(alpha * decay.powi(i.abs_diff(j) as i32))
    });
    let raw = rs.matrix() + bump;
    let normalized = &raw / Complex64::from(raw.norm());
    let repaired = pd_repair_relative(&normalized, DEFAULT_RELATIVE_FLOOR);
    let matrix = repaired.matrix() / Complex64::from(repaired.frobenius_norm());
    HermitianPd::new(matrix, repaired.floor() / 2.0)
}

/// Draws datasets for one fixed model: `y = Hθ + Bφ + ξ`, `ξ ∼ CN(0, σ²R)`,
/// group `j` secondaries `∼ CN(0, σ_j² R_s)`.
#[derive(Debug, Clone)]
pub struct DataGenerator {
    signal: ComplexVector,
    interference: ComplexVector,
    test_noise: ComplexGaussian,
    groups: Vec<(usize, ComplexGaussian)>,
}

impl DataGenerator {
    pub fn new(
        h: &ComplexMatrix,
        b: &ComplexMatrix,
        noise: &NoiseSpec,
        theta: &ComplexVector,
        phi: &ComplexVector,
    ) -> Result<Self> {
        let n = h.nrows();
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.nrows(),
            });
        }
        if theta.len() != h.ncols() {
            return Err(Error::DimensionMismatch {
                expected: h.ncols(),
                got: theta.len(),
            });
        }
        if phi.len() != b.ncols() {
            return Err(Error::DimensionMismatch {
                expected: b.ncols(),
                got: phi.len(),
            });
        }
        noise.validate(n)?;
        let test_noise = ComplexGaussian::zero_mean(&noise.r_test.scaled(noise.sigma2_test))?;
        let groups = noise
            .group_sizes
            .iter()
            .zip(&noise.group_scales)
            .map(|(&k, &s)| Ok((k, ComplexGaussian::zero_mean(&noise.rs_base.scaled(s))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            signal: h * theta,
            interference: b * phi,
            test_noise,
            groups,
        })
    }

    /// The noise draws consume the rng identically under both hypotheses.
    pub fn generate<R: Rng + ?Sized>(&self, hypothesis: Hypothesis, rng: &mut R) -> Dataset {
        let xi = self.test_noise.sample(rng);
        let base = &self.interference + xi;
        let y = match hypothesis {
            Hypothesis::H0 => base,
            Hypothesis::H1 => base + &self.signal,
        };
        let secondary = self
            .groups
            .iter()
            .map(|(k, dist)| (0..*k).map(|_| dist.sample(rng)).collect())
            .collect();
        Dataset {
            y,
            secondary,
            truth: hypothesis,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn generate_dataset<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    noise: &NoiseSpec,
    theta: &ComplexVector,
    phi: &ComplexVector,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<Dataset> {
    Ok(DataGenerator::new(h, b, noise, theta, phi)?.generate(hypothesis, rng))
}
