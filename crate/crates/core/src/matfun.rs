//! Hermitian matrix kernels.
//!
//! Every matrix function in this crate goes through a Hermitian
//! eigendecomposition `A = V diag(λ) V^H` and applies a scalar function to the
//! spectrum. Small negative eigenvalues produced by rounding are tolerated and
//! clamped to a configurable floor, which yields the usual `0 · log 0 = 0`
//! convention for entropies and keeps `G^{-1/2}` finite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix; the numeric carrier for states, Kraus operators and
/// gradients.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Default eigenvalue floor used by [`matrix_log`] and [`inv_sqrt_psd`].
pub const DEFAULT_EIG_FLOOR: f64 = 1e-12;

/// Relative Hermiticity residual accepted by [`eig_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Eigenvalues below this are treated as a PSD violation rather than rounding.
pub const NEGATIVE_EIG_TOL: f64 = 1e-10;

const EIG_MAX_SWEEPS: usize = 10_000;

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Real eigenvalues in ascending order.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, column `i` paired with `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// `V diag(f(λ)) V^H`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fj = f(lambda);
            scaled.column_mut(j).scale_mut(fj);
        }
        symmetrize(&(scaled * v.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_spectrum(|x| x)
    }
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Build a matrix from real row-major data.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)))
}

pub fn real_diagonal(diag: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&DVector::from_iterator(
        diag.len(),
        diag.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

fn ensure_square(a: &ComplexMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

/// `‖A − A^H‖_F / max(1, ‖A‖_F)`.
pub fn hermiticity_residual(a: &ComplexMatrix) -> f64 {
    (a - a.adjoint()).norm() / a.norm().max(1.0)
}

/// `(A + A^H) / 2`. The result is exactly Hermitian: the diagonal is real and
/// mirrored entries are exact conjugates.
pub fn hermitian_part(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a)?;
    Ok(symmetrize(a))
}

pub(crate) fn symmetrize(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<HermitianEig> {
    ensure_square(a)?;
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let residual = hermiticity_residual(a);
    if residual >= HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    let h = hermitian_part(a)?;
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, EIG_MAX_SWEEPS)
        .ok_or(Error::EigenNonConvergence)?;

    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps solver order on ties.
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    if !eigenvalues.iter().all(|x| x.is_finite()) || !is_finite(&eigenvectors) {
        return Err(Error::EigenNonConvergence);
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

fn check_psd(eig: &HermitianEig) -> Result<()> {
    let min_eigenvalue = eig.min_eigenvalue();
    if min_eigenvalue < -NEGATIVE_EIG_TOL {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
    }
    Ok(())
}

/// Matrix logarithm of a Hermitian PSD matrix in the given base, with the
/// spectrum clamped from below at `eig_floor`.
pub fn matrix_log(a: &ComplexMatrix, base: f64, eig_floor: f64) -> Result<ComplexMatrix> {
    if !(base > 1.0) || !base.is_finite() {
        return Err(Error::InvalidLogBase(base));
    }
    let eig = eig_hermitian(a)?;
    check_psd(&eig)?;
    Ok(log_from_eig(&eig, base, eig_floor))
}

/// Clamped logarithm from an existing decomposition. No PSD check.
pub(crate) fn log_from_eig(eig: &HermitianEig, base: f64, eig_floor: f64) -> ComplexMatrix {
    let ln_base = base.ln();
    eig.map_spectrum(|x| x.max(eig_floor).ln() / ln_base)
}

/// `A^{-1/2}` for Hermitian positive (semi)definite `A`, eigenvalues clamped
/// at `eig_floor`.
pub fn inv_sqrt_psd(a: &ComplexMatrix, eig_floor: f64) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(a)?;
    check_psd(&eig)?;
    Ok(inv_sqrt_from_eig(&eig, eig_floor).0)
}

/// Returns `A^{-1/2}` and the number of eigenvalues that were clamped.
pub(crate) fn inv_sqrt_from_eig(eig: &HermitianEig, eig_floor: f64) -> (ComplexMatrix, usize) {
    let clamped = eig.eigenvalues.iter().filter(|&&x| x < eig_floor).count();
    let b = eig.map_spectrum(|x| 1.0 / x.max(eig_floor).sqrt());
    (b, clamped)
}
