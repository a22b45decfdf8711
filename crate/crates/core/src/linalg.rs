//! Complex Hermitian linear-algebra primitives shared by every detector.
//!
//! Matrices and vectors are plain `nalgebra` dynamic types over `Complex64`.
//! [`HermitianPd`] wraps a matrix that has been checked (or repaired) to be
//! Hermitian positive definite, which is what whitening, inversion and
//! `log det` need.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative eigenvalue floor used wherever a covariance must stay invertible.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-8;

/// Largest admissible condition number of a Gram matrix `D†D`.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// A Hermitian positive definite matrix with a known eigenvalue floor.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPd {
    matrix: ComplexMatrix,
    floor: f64,
}

impl HermitianPd {
    /// Validates that `matrix` is square, Hermitian to 1e-12 relative and has
    /// every eigenvalue at or above `floor`.
    pub fn new(matrix: ComplexMatrix, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(crate::error::invalid("floor", format!("{floor} must be > 0")));
        }
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let norm = matrix.norm();
        let skew = (&matrix - matrix.adjoint()).norm();
        if !norm.is_finite() || skew > HERMITIAN_TOLERANCE * norm {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: f64::NAN,
                floor,
            });
        }
        let min_eigenvalue = hermitian_eigenvalues(&matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eigenvalue < floor {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue,
                floor,
            });
        }
        Ok(Self { matrix, floor })
    }

    /// Identity scaled by `scale`.
    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        let matrix = ComplexMatrix::identity(dim, dim) * Complex64::from(scale);
        Self::new(matrix, scale.abs() * DEFAULT_RELATIVE_FLOOR)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `c·M` for `c > 0`; the floor scales with it.
    pub fn scaled(&self, c: f64) -> Self {
        debug_assert!(c > 0.0);
        Self {
            matrix: &self.matrix * Complex64::from(c),
            floor: self.floor * c,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn inverse(&self) -> ComplexMatrix {
        match checked_cholesky(&self.matrix) {
            Some(chol) => hermitian_part(&chol.inverse()),
            None => {
                let eig = self.matrix.clone().symmetric_eigen();
                spectral_map(&eig.eigenvectors, &eig.eigenvalues, |l| 1.0 / l)
            }
        }
    }

    pub fn log_det(&self) -> f64 {
        match checked_cholesky(&self.matrix) {
            Some(chol) => {
                let l = chol.l_dirty();
                2.0 * (0..self.dim()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
            }
            None => self.eigenvalues().iter().map(|l| l.ln()).sum(),
        }
    }

    /// Lower-triangular factor `L` with `L L† = M`, falling back to the
    /// symmetric eigen-factor `V Λ^{1/2}` when Cholesky breaks down.
    pub fn factor(&self) -> ComplexMatrix {
        match checked_cholesky(&self.matrix) {
            Some(chol) => chol.unpack(),
            None => {
                let eig = self.matrix.clone().symmetric_eigen();
                let mut f = eig.eigenvectors.clone();
                for (j, &l) in eig.eigenvalues.iter().enumerate() {
                    let s = Complex64::from(l.max(0.0).sqrt());
                    for i in 0..f.nrows() {
                        f[(i, j)] *= s;
                    }
                }
                f
            }
        }
    }
}

/// Cholesky factorization that fails on non-positive pivots. nalgebra's
/// complex factorization takes complex square roots and never fails.
pub fn checked_cholesky(m: &ComplexMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let ok = (0..m.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-10 * d.re
    });
    ok.then_some(chol)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex64::from(0.5)
}

/// `x x†`.
pub fn outer(x: &ComplexVector) -> ComplexMatrix {
    x * x.adjoint()
}

/// Real part of `x† M x`. For Hermitian `M` the imaginary part is rounding noise.
pub fn quad_form(x: &ComplexVector, m: &ComplexMatrix) -> f64 {
    let value = x.dotc(&(m * x));
    debug_assert!(
        value.im.abs() <= 1e-9 * (value.re.abs() + x.norm_squared() * m.norm() + 1e-300),
        "quadratic form has non-negligible imaginary part {value}"
    );
    value.re
}

/// Applies `f` to the spectrum: `V diag(f(λ)) V†`.
fn spectral_map(
    vectors: &ComplexMatrix,
    values: &DVector<f64>,
    f: impl Fn(f64) -> f64,
) -> ComplexMatrix {
    let mut scaled = vectors.clone();
    for (j, &l) in values.iter().enumerate() {
        let s = Complex64::from(f(l));
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    hermitian_part(&(scaled * vectors.adjoint()))
}

/// `P_D = D (D†D)⁻¹ D†`, the orthogonal projector onto the column span of `D`.
pub fn orthogonal_projector(d: &ComplexMatrix) -> Result<ComplexMatrix> {
    let gram = d.adjoint() * d;
    let eigenvalues = hermitian_eigenvalues(&gram);
    let (min, max) = (eigenvalues[0], eigenvalues[eigenvalues.len() - 1]);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < MAX_GRAM_CONDITION) {
        return Err(Error::SingularGram { condition });
    }
    let chol = checked_cholesky(&gram).ok_or(Error::SingularGram { condition })?;
    let projector = d * chol.solve(&d.adjoint());
    Ok(hermitian_part(&projector))
}

/// `P_{D⊥} = I − P_D`.
pub fn complement_projector(d: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = d.nrows();
    Ok(ComplexMatrix::identity(n, n) - orthogonal_projector(d)?)
}

/// Principal inverse square root of a Hermitian PD matrix.
pub fn inv_sqrt(m: &HermitianPd) -> Result<ComplexMatrix> {
    let eig = m.matrix().clone().symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < m.floor() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue,
            floor: m.floor(),
        });
    }
    Ok(spectral_map(&eig.eigenvectors, &eig.eigenvalues, |l| l.powf(-0.5)))
}

/// `S = (1/K) Σ n_k n_k†`.
pub fn sample_covariance(samples: &[ComplexVector]) -> Result<ComplexMatrix> {
    let first = samples.first().ok_or(Error::EmptySamples)?;
    let n = first.len();
    let mut acc = ComplexMatrix::zeros(n, n);
    for s in samples {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.len(),
            });
        }
        acc.ger(Complex64::from(1.0), s, &s.conjugate(), Complex64::from(1.0));
    }
    Ok(acc / Complex64::from(samples.len() as f64))
}

/// Symmetrizes `m` and lifts every eigenvalue below `floor` up to `floor`.
pub fn pd_repair(m: &ComplexMatrix, floor: f64) -> HermitianPd {
    assert!(m.is_square(), "pd_repair needs a square matrix");
    let floor = if floor > 0.0 { floor } else { f64::MIN_POSITIVE };
    let herm = hermitian_part(m);
    let n = herm.nrows();
    // Cholesky of M − floor·I succeeds iff every eigenvalue exceeds the floor.
    let shifted = &herm - ComplexMatrix::identity(n, n) * Complex64::from(floor);
    if herm.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && checked_cholesky(&shifted).is_some() {
        return HermitianPd { matrix: herm, floor };
    }
    let eig = herm.clone().symmetric_eigen();
    let matrix = spectral_map(&eig.eigenvectors, &eig.eigenvalues, |l| {
        if l.is_nan() {
            floor
        } else {
            l.max(floor)
        }
    });
    HermitianPd { matrix, floor }
}

/// [`pd_repair`] with a floor of `relative` times the largest eigenvalue.
pub fn pd_repair_relative(m: &ComplexMatrix, relative: f64) -> HermitianPd {
    let herm = hermitian_part(m);
    let largest = hermitian_eigenvalues(&herm).last().copied().unwrap_or(0.0);
    let floor = if largest > 0.0 {
        relative * largest
    } else {
        relative
    };
    pd_repair(&herm, floor)
}

/// Applies a whitening matrix to every column of `d`.
pub fn whiten(w: &ComplexMatrix, d: &ComplexMatrix) -> ComplexMatrix {
    w * d
}
