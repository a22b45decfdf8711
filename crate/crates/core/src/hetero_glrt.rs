//! Constrained GLRT for heterogeneous environments.
//!
//! The test-cell covariance `R` is not assumed equal to the training
//! covariance `R_s`; it is only required to stay inside the Frobenius ball
//! `‖R − R_s‖_F² ≤ ε` with `‖R‖_F ≤ 1`. Under each hypothesis the detector
//!
//! 1. estimates `R_s` and the per-cell scales `σ_j²` from the secondary data
//!    by alternating the weighted sample covariance and the scale estimates,
//! 2. alternates the generalized least-squares coefficients and `σ²` with an
//!    ADMM solve for `R` (split as `R = Z`, penalties for both constraints),
//! 3. combines the two fits into
//!    `ℓ = (q₀/q₁)^{2N} · det R₀ / det R₁`, where `q_i` is the whitened residual
//!    energy under hypothesis `i`.
//!
//! The statistic is carried in the log domain.

use log::warn;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    self, complement_projector, hermitian_eigenvalues, inv_sqrt, outer, pd_repair_relative,
    ComplexMatrix, ComplexVector, HermitianPd, DEFAULT_RELATIVE_FLOOR, MAX_GRAM_CONDITION,
};
use crate::model::stack_columns;

/// ADMM aborts once `‖R‖_F` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams {
    /// Proximity bound `ε` on `‖R − R_s‖_F²`.
    pub epsilon: f64,
    /// Augmented-Lagrangian weight.
    pub rho: f64,
    /// Gradient step.
    pub eta: f64,
    pub max_iter: usize,
    /// Relative eigenvalue floor for `R`/`Z`, absolute floor for scale estimates.
    pub pd_floor: f64,
    /// Early stop when both `‖R − Z‖_F` and the iterate change fall below it.
    /// Zero disables early stopping.
    pub primal_tol: f64,
    /// Passes of {coefficients, σ²} ↔ ADMM per hypothesis.
    pub outer_iters: usize,
    /// Relative-change tolerance of the `R_s`/`σ_j²` alternation.
    pub alt_tol: f64,
    pub max_alt_iters: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            rho: 2.0,
            eta: 1e-4,
            max_iter: 2000,
            pd_floor: DEFAULT_RELATIVE_FLOOR,
            primal_tol: 1e-6,
            outer_iters: 3,
            alt_tol: 1e-6,
            max_alt_iters: 100,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(invalid("epsilon", "must be ≥ 0"));
        }
        for (name, value) in [
            ("rho", self.rho),
            ("eta", self.eta),
            ("pd_floor", self.pd_floor),
            ("alt_tol", self.alt_tol),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(invalid(name, format!("{value} must be > 0")));
            }
        }
        if !(self.primal_tol >= 0.0) {
            return Err(invalid("primal_tol", "must be ≥ 0"));
        }
        for (name, value) in [
            ("max_iter", self.max_iter),
            ("outer_iters", self.outer_iters),
            ("max_alt_iters", self.max_alt_iters),
        ] {
            if value == 0 {
                return Err(invalid(name, "must be ≥ 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub r: HermitianPd,
    pub z: HermitianPd,
    /// Dual for `R − Z = 0`.
    pub u: ComplexMatrix,
    /// Dual for the norm constraint.
    pub gamma: f64,
    /// Dual for the proximity constraint.
    pub lambda: f64,
    pub iter: usize,
}

impl AdmmState {
    /// `R = Z = R_s`, all duals zero.
    pub fn initial(rs: &HermitianPd) -> Self {
        let n = rs.dim();
        Self {
            r: rs.clone(),
            z: rs.clone(),
            u: ComplexMatrix::zeros(n, n),
            gamma: 0.0,
            lambda: 0.0,
            iter: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryEstimate {
    /// Unit-Frobenius-norm base covariance.
    pub rs_hat: HermitianPd,
    pub group_scales_hat: Vec<f64>,
    pub iterations: usize,
}

/// `S_w = (1/K) Σ_j Σ_k n n† / σ_j²`.
pub fn weighted_sample_cov(groups: &[Vec<ComplexVector>], scales: &[f64]) -> Result<ComplexMatrix> {
    if groups.len() != scales.len() {
        return Err(Error::DimensionMismatch {
            expected: groups.len(),
            got: scales.len(),
        });
    }
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0)) {
        return Err(invalid("group_scales", format!("{s} must be > 0")));
    }
    let n = groups
        .iter()
        .flatten()
        .next()
        .ok_or(Error::EmptySamples)?
        .len();
    let total: usize = groups.iter().map(Vec::len).sum();
    let mut acc = ComplexMatrix::zeros(n, n);
    for (group, &scale) in groups.iter().zip(scales) {
        if group.is_empty() {
            return Err(Error::EmptySamples);
        }
        let weight = Complex64::from(1.0 / scale);
        for x in group {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
            acc.ger(weight, x, &x.conjugate(), Complex64::from(1.0));
        }
    }
    Ok(acc / Complex64::from(total as f64))
}

/// `σ̂_j² = (1/(N K_j)) Σ_k n† R_s⁻¹ n`, clamped below at `floor`.
pub fn estimate_group_scales(
    groups: &[Vec<ComplexVector>],
    rs: &HermitianPd,
    floor: f64,
) -> Result<Vec<f64>> {
    let n = rs.dim();
    let rs_inv = rs.inverse();
    groups
        .iter()
        .enumerate()
        .map(|(j, group)| {
            if group.is_empty() {
                return Err(Error::EmptySamples);
            }
            let mut sum = 0.0;
            for x in group {
                if x.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: x.len(),
                    });
                }
                sum += linalg::quad_form(x, &rs_inv);
            }
            let scale = sum / (n * group.len()) as f64;
            if scale < floor {
                warn!("group {j} scale estimate {scale:.3e} clamped to {floor:.3e}");
                Ok(floor)
            } else {
                Ok(scale)
            }
        })
        .collect()
}

/// Alternates `σ̂_j²` and `R_s ← S_w/‖S_w‖_F` from unit scales until the
/// relative change of `R_s` drops below `tol`.
pub fn estimate_rs_alternating(
    groups: &[Vec<ComplexVector>],
    tol: f64,
    max_alt_iters: usize,
    floor: f64,
) -> Result<SecondaryEstimate> {
    let n = groups
        .iter()
        .flatten()
        .next()
        .ok_or(Error::EmptySamples)?
        .len();
    let k: usize = groups.iter().map(Vec::len).sum();
    if k < n {
        warn!("only {k} secondary samples for dimension {n}; covariance estimate is rank deficient");
    }
    let mut scales = vec![1.0; groups.len()];
    let mut current: Option<HermitianPd> = None;
    for iteration in 1..=max_alt_iters.max(1) {
        let next = normalized_base(&weighted_sample_cov(groups, &scales)?, floor)?;
        scales = estimate_group_scales(groups, &next, floor)?;
        let change = current
            .as_ref()
            .map(|prev| (next.matrix() - prev.matrix()).norm() / prev.frobenius_norm())
            .unwrap_or(f64::INFINITY);
        current = Some(next);
        if change < tol {
            return Ok(SecondaryEstimate {
                rs_hat: current.expect("set above"),
                group_scales_hat: scales,
                iterations: iteration,
            });
        }
    }
    warn!("R_s alternation hit {max_alt_iters} iterations without reaching tol {tol:.1e}");
    Ok(SecondaryEstimate {
        rs_hat: current.expect("at least one iteration"),
        group_scales_hat: scales,
        iterations: max_alt_iters,
    })
}

fn normalized_base(sw: &ComplexMatrix, floor: f64) -> Result<HermitianPd> {
    let largest = hermitian_eigenvalues(sw).last().copied().unwrap_or(0.0);
    if !(largest > 0.0) || !largest.is_finite() {
        return Err(Error::InsufficientSecondaryData(format!(
            "weighted sample covariance has largest eigenvalue {largest:.3e}"
        )));
    }
    let repaired = pd_repair_relative(sw, floor);
    let norm = repaired.frobenius_norm();
    Ok(repaired.scaled(1.0 / norm))
}

/// Generalized least-squares fit in the `R`-whitened domain.
#[derive(Debug, Clone)]
pub struct WhitenedFit {
    /// `(D̄†D̄)⁻¹D̄†ȳ`.
    pub coeff: ComplexVector,
    /// `ȳ†P_{D̄⊥}ȳ`.
    pub residual_energy: f64,
}

pub fn whitened_fit(y: &ComplexVector, d: &ComplexMatrix, r: &HermitianPd) -> Result<WhitenedFit> {
    let n = r.dim();
    for got in [y.len(), d.nrows()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let w = inv_sqrt(r)?;
    let d_bar = &w * d;
    let y_bar = &w * y;
    let gram = d_bar.adjoint() * &d_bar;
    let eigenvalues = hermitian_eigenvalues(&gram);
    let condition = eigenvalues[eigenvalues.len() - 1] / eigenvalues[0];
    if !(eigenvalues[0] > 0.0 && condition < MAX_GRAM_CONDITION) {
        return Err(Error::SingularGram { condition });
    }
    let chol = linalg::checked_cholesky(&gram).ok_or(Error::SingularGram { condition })?;
    let coeff = chol.solve(&(d_bar.adjoint() * &y_bar));
    let residual_energy = linalg::quad_form(&y_bar, &complement_projector(&d_bar)?);
    Ok(WhitenedFit {
        coeff,
        residual_energy,
    })
}

/// `φ̂ = (B̄†B̄)⁻¹B̄†ȳ`.
pub fn estimate_phi(y: &ComplexVector, b: &ComplexMatrix, r: &HermitianPd) -> Result<ComplexVector> {
    Ok(whitened_fit(y, b, r)?.coeff)
}

/// `β̂ = (C̄†C̄)⁻¹C̄†ȳ` with `C = [H, B]`.
pub fn estimate_beta(y: &ComplexVector, c: &ComplexMatrix, r: &HermitianPd) -> Result<ComplexVector> {
    Ok(whitened_fit(y, c, r)?.coeff)
}

/// `σ̂² = ȳ†P_{D̄⊥}ȳ / N`, clamped below at `floor`.
pub fn estimate_sigma2(y: &ComplexVector, d: &ComplexMatrix, r: &HermitianPd, floor: f64) -> Result<f64> {
    let q = whitened_fit(y, d, r)?.residual_energy;
    Ok(clamp_sigma2(q / y.len() as f64, floor))
}

fn clamp_sigma2(sigma2: f64, floor: f64) -> f64 {
    if sigma2 < floor {
        warn!("σ² estimate {sigma2:.3e} clamped to {floor:.3e}");
        floor
    } else {
        sigma2
    }
}

/// One hypothesis' covariance problem: `min log det R + tr(Z⁻¹M)/σ²` subject
/// to `R = Z`, `‖R − R_s‖_F² ≤ ε`, `‖R‖_F² ≤ 1`.
#[derive(Debug, Clone)]
pub struct AdmmProblem {
    /// Residual outer product `(y − D·coeff)(y − D·coeff)†`.
    pub residual_outer: ComplexMatrix,
    pub sigma2: f64,
    pub rs: HermitianPd,
    pub params: AdmmParams,
}

/// `max(0, x)`; its Heaviside factor is implicit.
fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

impl AdmmProblem {
    pub fn new(
        y: &ComplexVector,
        d: &ComplexMatrix,
        coeff: &ComplexVector,
        sigma2: f64,
        rs: &HermitianPd,
        params: &AdmmParams,
    ) -> Result<Self> {
        params.validate()?;
        let n = rs.dim();
        for got in [y.len(), d.nrows()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        if coeff.len() != d.ncols() {
            return Err(Error::DimensionMismatch {
                expected: d.ncols(),
                got: coeff.len(),
            });
        }
        if !(sigma2 > 0.0) {
            return Err(invalid("sigma2", format!("{sigma2} must be > 0")));
        }
        let residual = y - d * coeff;
        Ok(Self {
            residual_outer: outer(&residual),
            sigma2,
            rs: rs.clone(),
            params: *params,
        })
    }

    fn proximity_excess(&self, r: &ComplexMatrix) -> f64 {
        (r - self.rs.matrix()).norm_squared() - self.params.epsilon
    }

    fn norm_excess(r: &ComplexMatrix) -> f64 {
        r.norm_squared() - 1.0
    }

    /// `L_ρ(R, Z, U, γ, λ)`.
    pub fn lagrangian(&self, state: &AdmmState) -> f64 {
        let rho = self.params.rho;
        let r = state.r.matrix();
        let z = state.z.matrix();
        let prox = hinge(self.proximity_excess(r));
        let norm = hinge(Self::norm_excess(r));
        let diff = r - z;
        let data = (state.z.inverse() * &self.residual_outer).trace().re / self.sigma2;
        state.r.log_det()
            + data
            + 0.5 * rho * prox.powi(4)
            + state.lambda * prox.powi(2)
            + 0.5 * rho * norm.powi(4)
            + state.gamma * norm.powi(2)
            + 0.5 * rho * diff.norm_squared()
            + (&state.u * &diff).trace().re
    }

    /// `∇_R L_ρ` as a Hermitian matrix `G` with `dL = Re tr(G dR)`.
    pub fn grad_r(&self, state: &AdmmState) -> ComplexMatrix {
        let rho = self.params.rho;
        let r = state.r.matrix();
        let prox = hinge(self.proximity_excess(r));
        let norm = hinge(Self::norm_excess(r));
        let prox_weight = 4.0 * rho * prox.powi(3) + 4.0 * state.lambda * prox;
        let norm_weight = 4.0 * rho * norm.powi(3) + 4.0 * state.gamma * norm;
        state.r.inverse()
            + (r - self.rs.matrix()) * Complex64::from(prox_weight)
            + r * Complex64::from(norm_weight)
            + state.u.adjoint()
            + (r - state.z.matrix()) * Complex64::from(rho)
    }

    /// `∇_Z L_ρ = −Z⁻¹MZ⁻¹/σ² + ρ(Z − R) − U†`.
    pub fn grad_z(&self, state: &AdmmState) -> ComplexMatrix {
        let z_inv = state.z.inverse();
        let data = &z_inv * &self.residual_outer * &z_inv * Complex64::from(-1.0 / self.sigma2);
        data + (state.z.matrix() - state.r.matrix()) * Complex64::from(self.params.rho) - state.u.adjoint()
    }

    /// Gradient step on `R`, then on `Z` at the new `R`, each followed by PD
    /// repair. Returns `‖R^{t+1} − R^t‖_F`.
    pub fn primal_step(&self, state: &mut AdmmState) -> f64 {
        let eta = Complex64::from(self.params.eta);
        let r_next = state.r.matrix() - self.grad_r(state) * eta;
        let change = (&r_next - state.r.matrix()).norm();
        state.r = pd_repair_relative(&r_next, self.params.pd_floor);
        let z_next = state.z.matrix() - self.grad_z(state) * eta;
        state.z = pd_repair_relative(&z_next, self.params.pd_floor);
        change
    }

    pub fn dual_step(&self, state: &mut AdmmState) {
        let rho = self.params.rho;
        let r = state.r.matrix();
        state.u += (r - state.z.matrix()) * Complex64::from(rho);
        state.gamma += rho * hinge(Self::norm_excess(r)).powi(2);
        state.lambda += rho * hinge(self.proximity_excess(r)).powi(2);
    }

    pub fn solve(&self) -> Result<AdmmOutcome> {
        self.solve_from(AdmmState::initial(&self.rs))
    }

    pub fn solve_from(&self, mut state: AdmmState) -> Result<AdmmOutcome> {
        let tol = self.params.primal_tol;
        let mut converged = false;
        while state.iter < self.params.max_iter {
            let change = self.primal_step(&mut state);
            self.dual_step(&mut state);
            state.iter += 1;
            let norm = state.r.frobenius_norm();
            if !norm.is_finite() || norm > DIVERGENCE_NORM || !state.lambda.is_finite() {
                return Err(Error::AdmmDiverged {
                    norm,
                    iteration: state.iter,
                });
            }
            if tol > 0.0 && change < tol && primal_residual(&state) < tol {
                converged = true;
                break;
            }
        }
        Ok(AdmmOutcome {
            primal_residual: primal_residual(&state),
            converged,
            state,
        })
    }
}

pub fn primal_residual(state: &AdmmState) -> f64 {
    (state.r.matrix() - state.z.matrix()).norm()
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub state: AdmmState,
    pub primal_residual: f64,
    /// Stopped early on `primal_tol` rather than on `max_iter`.
    pub converged: bool,
}

impl AdmmOutcome {
    pub fn r(&self) -> &HermitianPd {
        &self.state.r
    }
}

/// `L_ρ` at `state` for the residual outer product `resid_outer`.
pub fn augmented_lagrangian(
    state: &AdmmState,
    params: &AdmmParams,
    resid_outer: &ComplexMatrix,
    sigma2: f64,
    rs: &HermitianPd,
) -> f64 {
    AdmmProblem {
        residual_outer: resid_outer.clone(),
        sigma2,
        rs: rs.clone(),
        params: *params,
    }
    .lagrangian(state)
}

/// Runs ADMM from `R = Z = R_s` and returns the final `R`.
pub fn admm_estimate_r(
    y: &ComplexVector,
    d: &ComplexMatrix,
    coeff: &ComplexVector,
    sigma2: f64,
    rs: &HermitianPd,
    params: &AdmmParams,
) -> Result<HermitianPd> {
    Ok(AdmmProblem::new(y, d, coeff, sigma2, rs, params)?
        .solve()?
        .state
        .r)
}

/// Final estimates under one hypothesis.
#[derive(Debug, Clone)]
pub struct HypothesisFit {
    pub r: HermitianPd,
    pub coeff: ComplexVector,
    pub sigma2: f64,
    /// Whitened residual energy `ȳ†P_{D̄⊥}ȳ` under the final `R`.
    pub residual_energy: f64,
    pub admm_iterations: usize,
}

/// Outer alternation of {coefficients, σ²} with ADMM for `R`, starting at `R_s`.
pub fn fit_hypothesis(
    y: &ComplexVector,
    d: &ComplexMatrix,
    rs: &HermitianPd,
    params: &AdmmParams,
) -> Result<HypothesisFit> {
    params.validate()?;
    let mut r = rs.clone();
    let mut admm_iterations = 0;
    for _ in 0..params.outer_iters {
        let fit = whitened_fit(y, d, &r)?;
        let sigma2 = clamp_sigma2(fit.residual_energy / y.len() as f64, params.pd_floor);
        let outcome = AdmmProblem::new(y, d, &fit.coeff, sigma2, rs, params)?.solve()?;
        admm_iterations += outcome.state.iter;
        r = outcome.state.r;
    }
    let fit = whitened_fit(y, d, &r)?;
    Ok(HypothesisFit {
        sigma2: clamp_sigma2(fit.residual_energy / y.len() as f64, params.pd_floor),
        coeff: fit.coeff,
        residual_energy: fit.residual_energy,
        r,
        admm_iterations,
    })
}

/// `2N(log q₀ − log q₁) + log det R₀ − log det R₁`.
pub fn log_statistic(n: usize, h0: &HypothesisFit, h1: &HypothesisFit) -> f64 {
    2.0 * n as f64 * (h0.residual_energy.ln() - h1.residual_energy.ln()) + h0.r.log_det()
        - h1.r.log_det()
}

#[derive(Debug, Clone)]
pub struct GlrtOutcome {
    pub log_statistic: f64,
    pub secondary: SecondaryEstimate,
    pub h0: HypothesisFit,
    pub h1: HypothesisFit,
}

impl GlrtOutcome {
    /// `exp` of the log statistic; may overflow to `inf` for large `N`.
    pub fn statistic(&self) -> f64 {
        self.log_statistic.exp()
    }
}

/// Full pipeline on one cell under test and its secondary groups.
pub fn hetero_glrt_statistic(
    y: &ComplexVector,
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    groups: &[Vec<ComplexVector>],
    params: &AdmmParams,
) -> Result<GlrtOutcome> {
    params.validate()?;
    let secondary = estimate_rs_alternating(groups, params.alt_tol, params.max_alt_iters, params.pd_floor)?;
    hetero_glrt_with_secondary(y, h, b, secondary, params)
}

/// Same as [`hetero_glrt_statistic`] with `R̂_s` already estimated.
pub fn hetero_glrt_with_secondary(
    y: &ComplexVector,
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    secondary: SecondaryEstimate,
    params: &AdmmParams,
) -> Result<GlrtOutcome> {
    let c = stack_columns(h, b);
    let h0 = fit_hypothesis(y, b, &secondary.rs_hat, params)?;
    let h1 = fit_hypothesis(y, &c, &secondary.rs_hat, params)?;
    if !(h0.residual_energy > 0.0) {
        return Err(Error::InInterferenceSubspace);
    }
    if !(h1.residual_energy > 0.0) {
        return Err(Error::InSpanOfC);
    }
    let log_statistic = log_statistic(y.len(), &h0, &h1);
    Ok(GlrtOutcome {
        log_statistic,
        secondary,
        h0,
        h1,
    })
}
