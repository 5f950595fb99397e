//! Quantum states, ensembles and entropy functionals.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matfun::{self, ComplexMatrix};

/// Tolerance for user-supplied states (text files carry fewer digits).
pub const INPUT_TOL: f64 = 1e-8;
/// Tolerance for states produced internally.
pub const INTERNAL_TOL: f64 = 1e-10;

/// Unit-norm complex state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Accepts vectors whose norm is within [`INPUT_TOL`] of one and
    /// renormalizes them exactly.
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::DimensionMismatch("empty state vector".into()));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let norm = amplitudes.norm();
        let deviation = (norm - 1.0).abs();
        if deviation > INPUT_TOL {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(v: DVector<Complex64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized {
                deviation: (norm - 1.0).abs(),
            });
        }
        Self::new(v.unscale(norm))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates at `tol` and stores the exact Hermitian part.
    pub fn new(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        let report = validate_density(&matrix, tol);
        if !report.is_valid() {
            return Err(Error::InvalidDensity(report.describe()));
        }
        Ok(Self {
            matrix: matfun::symmetrize(&matrix),
        })
    }

    /// For matrices that are valid by construction (channel outputs, mixtures).
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self {
            matrix: matfun::symmetrize(&matrix),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: matfun::identity(dim).unscale(dim as f64),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Rank-one projector `x x^H`.
pub fn pure_to_density(x: &PureState) -> DensityMatrix {
    let a = x.amplitudes();
    DensityMatrix::from_trusted(a * a.adjoint())
}

/// Probabilities and states `{p_i, X_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    probabilities: Vec<f64>,
    states: Vec<DensityMatrix>,
}

fn check_simplex(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    if let Some(&bad) = p.iter().find(|x| !x.is_finite() || **x < -tol) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {bad} out of range"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidProbabilities(format!("sum is {total}")));
    }
    Ok(())
}

impl Ensemble {
    pub fn new(probabilities: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if probabilities.len() != states.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {} states",
                probabilities.len(),
                states.len()
            )));
        }
        check_simplex(&probabilities, INPUT_TOL)?;
        let dim = states[0].dim();
        if let Some(s) = states.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "ensemble states of dimension {dim} and {}",
                s.dim()
            )));
        }
        let probabilities = probabilities.iter().map(|&x| x.max(0.0)).collect();
        Ok(Self {
            probabilities,
            states,
        })
    }

    pub fn from_pure(probabilities: Vec<f64>, states: &[PureState]) -> Result<Self> {
        Self::new(probabilities, states.iter().map(pure_to_density).collect())
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }
}

/// Ensemble of pure states, kept in vector form so the input optimizer can
/// move the amplitudes directly.
#[derive(Debug, Clone, PartialEq)]
pub struct PureEnsemble {
    probabilities: Vec<f64>,
    states: Vec<PureState>,
}

impl PureEnsemble {
    pub fn new(probabilities: Vec<f64>, states: Vec<PureState>) -> Result<Self> {
        // Reuse the mixed-ensemble checks.
        Ensemble::from_pure(probabilities.clone(), &states)?;
        let probabilities = probabilities.iter().map(|&x| x.max(0.0)).collect();
        Ok(Self {
            probabilities,
            states,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn to_ensemble(&self) -> Ensemble {
        Ensemble {
            probabilities: self.probabilities.clone(),
            states: self.states.iter().map(pure_to_density).collect(),
        }
    }
}

/// `Σ p_i X_i`.
pub fn mix(e: &Ensemble) -> DensityMatrix {
    let n = e.dim();
    let mut acc = ComplexMatrix::zeros(n, n);
    for (p, s) in e.probabilities.iter().zip(&e.states) {
        acc += s.matrix().scale(*p);
    }
    DensityMatrix::from_trusted(acc)
}

/// Entropy of a spectrum, `-Σ λ log λ` with `0 log 0 = 0`. Negative rounding
/// noise is dropped.
pub(crate) fn spectral_entropy(eigenvalues: impl IntoIterator<Item = f64>, base: f64) -> f64 {
    let ln_base = base.ln();
    -eigenvalues
        .into_iter()
        .filter(|&x| x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
        / ln_base
}

/// Von Neumann entropy `-Tr(Y log Y)` in the given base.
pub fn von_neumann_entropy(y: &DensityMatrix, base: f64) -> Result<f64> {
    if !(base > 1.0) || !base.is_finite() {
        return Err(Error::InvalidLogBase(base));
    }
    let eig = matfun::eig_hermitian(y.matrix())?;
    Ok(spectral_entropy(eig.eigenvalues.iter().copied(), base))
}

/// Shannon entropy `-Σ p_i log p_i` of a probability vector.
pub fn shannon_entropy(p: &[f64], base: f64) -> Result<f64> {
    if !(base > 1.0) || !base.is_finite() {
        return Err(Error::InvalidLogBase(base));
    }
    if let Some(&bad) = p.iter().find(|x| !x.is_finite() || **x < -NEG_PROB_TOL) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {bad} is negative"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > INPUT_TOL {
        return Err(Error::InvalidProbabilities(format!("sum is {total}")));
    }
    Ok(spectral_entropy(p.iter().copied(), base))
}

const NEG_PROB_TOL: f64 = 1e-10;

/// Outcome of the three density-matrix checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    pub hermitian: bool,
    pub positive_semidefinite: bool,
    pub unit_trace: bool,
    /// `‖X − X^H‖_F`
    pub hermitian_residual: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
    /// `|Tr X − 1|`
    pub trace_residual: f64,
}

impl DensityReport {
    pub fn is_valid(&self) -> bool {
        self.hermitian && self.positive_semidefinite && self.unit_trace
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.hermitian {
            parts.push(format!(
                "Hermitian residual {:.3e}",
                self.hermitian_residual
            ));
        }
        if !self.positive_semidefinite {
            parts.push(format!("min eigenvalue {:.3e}", self.min_eigenvalue));
        }
        if !self.unit_trace {
            parts.push(format!("trace residual {:.3e}", self.trace_residual));
        }
        parts.join(", ")
    }
}

/// Checks Hermiticity, positive semidefiniteness and unit trace. Non-square
/// input fails all three.
pub fn validate_density(x: &ComplexMatrix, tol: f64) -> DensityReport {
    if !x.is_square() || x.is_empty() || !matfun::is_finite(x) {
        return DensityReport {
            hermitian: false,
            positive_semidefinite: false,
            unit_trace: false,
            hermitian_residual: f64::INFINITY,
            min_eigenvalue: f64::NAN,
            trace_residual: f64::INFINITY,
        };
    }
    let hermitian_residual = (x - x.adjoint()).norm();
    let h = matfun::symmetrize(x);
    let min_eigenvalue = matfun::eig_hermitian(&h)
        .map(|e| e.min_eigenvalue())
        .unwrap_or(f64::NAN);
    let tr = matfun::trace(x);
    let trace_residual = (tr - Complex64::new(1.0, 0.0)).norm();
    DensityReport {
        hermitian: hermitian_residual < tol,
        positive_semidefinite: min_eigenvalue >= -tol,
        unit_trace: trace_residual < tol,
        hermitian_residual,
        min_eigenvalue,
        trace_residual,
    }
}
