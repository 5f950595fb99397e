//! Holevo quantity of an ensemble sent through a Kraus channel, and its
//! gradient with respect to each Kraus operator.
//!
//! `C = S(Y) − Σ_i p_i S(Y_i)` with `Y_i = Σ_k H_k X_i H_k^H` and
//! `Y = Σ_i p_i Y_i`. Values are reported in bits. Gradients are computed in
//! natural-log units, where `∂S/∂Y = −ln Y − I` holds literally:
//!
//! ```text
//! ∂C/∂H_k = −2 (ln Y + I) H_k X + 2 Σ_i p_i (ln Y_i + I) H_k X_i
//! ```
//!
//! The matrix `G` is the gradient with respect to the real parameterization
//! (`∂C/∂Re H + i ∂C/∂Im H`), which is what central differences over real and
//! imaginary parts measure.

use std::f64::consts::{E, LN_2};

use crate::channel::{self, KrausChannel};
use crate::error::{Error, Result};
use crate::matfun::{self, ComplexMatrix};
use crate::states::{self, spectral_entropy, Ensemble};

/// Holevo quantity with its entropy breakdown, all in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct HolevoResult {
    pub bound_bits: f64,
    pub average_output_entropy_bits: f64,
    pub per_state_entropies_bits: Vec<f64>,
}

/// `∂C/∂H_k` for every Kraus operator, in units of `log_base`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausGradient {
    pub per_operator: Vec<ComplexMatrix>,
    pub log_base: f64,
}

impl KrausGradient {
    pub fn frobenius_norm(&self) -> f64 {
        self.per_operator
            .iter()
            .map(|g| g.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Re-expressed in natural-log units.
    pub fn to_natural(&self) -> KrausGradient {
        let factor = self.log_base.ln();
        KrausGradient {
            per_operator: self.per_operator.iter().map(|g| g.scale(factor)).collect(),
            log_base: E,
        }
    }

    /// Real and imaginary parts of every entry, operator by operator.
    pub fn flatten(&self) -> Vec<f64> {
        self.per_operator
            .iter()
            .flat_map(|g| g.iter().flat_map(|z| [z.re, z.im]))
            .collect()
    }

    /// Cosine of the angle between two gradients in the real flattening.
    pub fn cosine_similarity(&self, other: &KrausGradient) -> f64 {
        let a = self.flatten();
        let b = other.flatten();
        assert_eq!(a.len(), b.len(), "gradient layouts differ");
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    /// Largest entrywise modulus of the difference, per operator, after
    /// converting both sides to natural-log units.
    pub fn max_deviation_per_operator(&self, other: &KrausGradient) -> Vec<f64> {
        let a = self.to_natural();
        let b = other.to_natural();
        a.per_operator
            .iter()
            .zip(&b.per_operator)
            .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.per_operator.iter().all(matfun::is_finite)
    }
}

fn check_compatible(ch: &KrausChannel, e: &Ensemble) -> Result<()> {
    if ch.input_dim() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble of dimension {}, channel input dimension {}",
            e.dim(),
            ch.input_dim()
        )));
    }
    Ok(())
}

/// Holevo quantity of `e` through `ch`, in bits.
pub fn holevo_bound(ch: &KrausChannel, e: &Ensemble) -> Result<HolevoResult> {
    check_compatible(ch, e)?;
    holevo_of_operators(ch.operators(), e)
}

/// Same quantity for an arbitrary operator set (no completeness required).
pub(crate) fn holevo_of_operators(
    operators: &[ComplexMatrix],
    e: &Ensemble,
) -> Result<HolevoResult> {
    let out = channel::apply_ensemble_operators(operators, e);
    let entropy_bits = |y: &states::DensityMatrix| -> Result<f64> {
        let eig = matfun::eig_hermitian(y.matrix())?;
        Ok(spectral_entropy(eig.eigenvalues.iter().copied(), 2.0))
    };
    let average_output_entropy_bits = entropy_bits(&out.average)?;
    let per_state_entropies_bits = out
        .outputs
        .iter()
        .map(entropy_bits)
        .collect::<Result<Vec<_>>>()?;
    let weighted: f64 = e
        .probabilities()
        .iter()
        .zip(&per_state_entropies_bits)
        .map(|(p, s)| p * s)
        .sum();
    Ok(HolevoResult {
        bound_bits: average_output_entropy_bits - weighted,
        average_output_entropy_bits,
        per_state_entropies_bits,
    })
}

/// Which algebraic form of the gradient to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientForm {
    /// `−2 (ln Y + I) H_k X + 2 Σ p_i (ln Y_i + I) H_k X_i`
    WithIdentityTerms,
    /// `−2 ln Y H_k X + 2 Σ p_i ln Y_i H_k X_i`; equal to the above because
    /// `X = Σ p_i X_i`.
    IdentityCancelled,
}

/// Analytic gradient `∂C/∂H_k` (natural-log units).
pub fn holevo_gradient(ch: &KrausChannel, e: &Ensemble, eig_floor: f64) -> Result<KrausGradient> {
    check_compatible(ch, e)?;
    gradient_of_operators(
        ch.operators(),
        e,
        eig_floor,
        GradientForm::WithIdentityTerms,
    )
}

/// Analytic gradient for an arbitrary operator set in the chosen form.
pub fn holevo_gradient_with(
    operators: &[ComplexMatrix],
    e: &Ensemble,
    eig_floor: f64,
    form: GradientForm,
) -> Result<KrausGradient> {
    let (_, n) = channel::operator_shape(operators)?;
    if n != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble of dimension {}, operators with {n} columns",
            e.dim()
        )));
    }
    gradient_of_operators(operators, e, eig_floor, form)
}

fn gradient_of_operators(
    operators: &[ComplexMatrix],
    e: &Ensemble,
    eig_floor: f64,
    form: GradientForm,
) -> Result<KrausGradient> {
    let m = operators[0].nrows();
    let out = channel::apply_ensemble_operators(operators, e);
    let shift = match form {
        GradientForm::WithIdentityTerms => matfun::identity(m),
        GradientForm::IdentityCancelled => ComplexMatrix::zeros(m, m),
    };
    let log_shifted = |y: &ComplexMatrix| -> Result<ComplexMatrix> {
        let eig = matfun::eig_hermitian(y)?;
        Ok(matfun::log_from_eig(&eig, E, eig_floor) + &shift)
    };
    let avg_term = log_shifted(out.average.matrix())?;
    let state_terms = out
        .outputs
        .iter()
        .map(|y| log_shifted(y.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let x_avg = states::mix(e);

    let per_operator = operators
        .iter()
        .map(|h| {
            let mut g = (&avg_term * h * x_avg.matrix()).scale(-2.0);
            for ((p, a_i), x_i) in e.probabilities().iter().zip(&state_terms).zip(e.states()) {
                if *p == 0.0 {
                    continue;
                }
                g += (a_i * h * x_i.matrix()).scale(2.0 * p);
            }
            g
        })
        .collect();
    let grad = KrausGradient {
        per_operator,
        log_base: E,
    };
    if !grad.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(grad)
}

/// Smallest and largest accepted finite-difference steps.
pub const FD_STEP_RANGE: (f64, f64) = (1e-8, 1e-3);

/// Central differences of [`holevo_bound`] (bits) over the real and imaginary
/// part of every Kraus entry. Perturbed operator sets are evaluated as-is,
/// without re-projection, so this measures the same unconstrained derivative
/// as [`holevo_gradient`]. The result carries `log_base = 2`.
pub fn finite_diff_gradient(ch: &KrausChannel, e: &Ensemble, step: f64) -> Result<KrausGradient> {
    check_compatible(ch, e)?;
    if !(FD_STEP_RANGE.0..=FD_STEP_RANGE.1).contains(&step) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step {step:e} outside [{:e}, {:e}]",
            FD_STEP_RANGE.0, FD_STEP_RANGE.1
        )));
    }
    let mut ops = ch.operators().to_vec();
    let mut per_operator = Vec::with_capacity(ops.len());
    for k in 0..ops.len() {
        let (rows, cols) = ops[k].shape();
        let mut g = ComplexMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let orig = ops[k][(r, c)];
                for imaginary in [false, true] {
                    let delta = if imaginary {
                        num_complex::Complex64::new(0.0, step)
                    } else {
                        num_complex::Complex64::new(step, 0.0)
                    };
                    ops[k][(r, c)] = orig + delta;
                    let plus = holevo_of_operators(&ops, e)?.bound_bits;
                    ops[k][(r, c)] = orig - delta;
                    let minus = holevo_of_operators(&ops, e)?.bound_bits;
                    ops[k][(r, c)] = orig;
                    let d = (plus - minus) / (2.0 * step);
                    if imaginary {
                        g[(r, c)].im = d;
                    } else {
                        g[(r, c)].re = d;
                    }
                }
            }
        }
        per_operator.push(g);
    }
    Ok(KrausGradient {
        per_operator,
        log_base: 2.0,
    })
}

/// Converts nats to bits.
pub fn nats_to_bits(x: f64) -> f64 {
    x / LN_2
}
