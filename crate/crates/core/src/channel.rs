//! Kraus-operator channels: application, completeness checks, projection
//! back onto the trace-preserving set, and random generation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matfun::{self, ComplexMatrix};
use crate::states::{DensityMatrix, Ensemble};

/// Default completeness tolerance for [`KrausChannel::new`].
pub const CPTP_TOL: f64 = 1e-10;

/// Quantum channel `X ↦ Σ_k H_k X H_k^H` with `Σ_k H_k^H H_k = I_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<ComplexMatrix>,
    input_dim: usize,
    output_dim: usize,
}

/// Common `(M, N)` shape of a nonempty operator list.
pub(crate) fn operator_shape(operators: &[ComplexMatrix]) -> Result<(usize, usize)> {
    let first = operators.first().ok_or(Error::EmptyOperatorSet)?;
    let shape = first.shape();
    if shape.0 == 0 || shape.1 == 0 {
        return Err(Error::DimensionMismatch("zero-sized Kraus operator".into()));
    }
    if let Some(op) = operators.iter().find(|h| h.shape() != shape) {
        return Err(Error::DimensionMismatch(format!(
            "Kraus operators of shape {:?} and {:?}",
            shape,
            op.shape()
        )));
    }
    Ok(shape)
}

/// `G = Σ_k H_k^H H_k`.
pub fn gram(operators: &[ComplexMatrix]) -> ComplexMatrix {
    let n = operators.first().map_or(0, |h| h.ncols());
    let mut g = ComplexMatrix::zeros(n, n);
    for h in operators {
        g += h.adjoint() * h;
    }
    g
}

/// `‖Σ_k H_k^H H_k − I‖_F`.
pub fn completeness_residual(operators: &[ComplexMatrix]) -> f64 {
    let g = gram(operators);
    (&g - matfun::identity(g.nrows())).norm()
}

impl KrausChannel {
    /// Validates completeness at [`CPTP_TOL`].
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerance(operators, CPTP_TOL)
    }

    pub fn with_tolerance(operators: Vec<ComplexMatrix>, tol: f64) -> Result<Self> {
        let (m, n) = operator_shape(&operators)?;
        if !operators.iter().all(matfun::is_finite) {
            return Err(Error::NonFinite);
        }
        let residual = completeness_residual(&operators);
        if !(residual < tol) {
            return Err(Error::NotTracePreserving { residual, tol });
        }
        Ok(Self {
            operators,
            input_dim: n,
            output_dim: m,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            operators: vec![matfun::identity(n)],
            input_dim: n,
            output_dim: n,
        }
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn into_operators(self) -> Vec<ComplexMatrix> {
        self.operators
    }

    /// N
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// M
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// K
    pub fn kraus_rank(&self) -> usize {
        self.operators.len()
    }

    pub fn completeness_residual(&self) -> f64 {
        completeness_residual(&self.operators)
    }

    /// Left-multiplies every operator by `u` (an `M'×M` matrix).
    pub fn left_multiply(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.ncols() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "left factor has {} columns, channel output dimension is {}",
                u.ncols(),
                self.output_dim
            )));
        }
        Self::new(self.operators.iter().map(|h| u * h).collect())
    }

    /// Compares the two maps on every matrix unit `E_ab` of the input space.
    /// Kraus representations are not unique, so operator-wise comparison
    /// would be wrong.
    pub fn same_action(&self, other: &KrausChannel, tol: f64) -> bool {
        if self.input_dim != other.input_dim || self.output_dim != other.output_dim {
            return false;
        }
        let n = self.input_dim;
        for a in 0..n {
            for b in 0..n {
                let mut e = ComplexMatrix::zeros(n, n);
                e[(a, b)] = Complex64::new(1.0, 0.0);
                let lhs = apply_operators(&self.operators, &e);
                let rhs = apply_operators(&other.operators, &e);
                if (lhs - rhs).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// `Σ_k H_k X H_k^H` for any square `X`, no validation.
pub(crate) fn apply_operators(operators: &[ComplexMatrix], x: &ComplexMatrix) -> ComplexMatrix {
    let m = operators[0].nrows();
    let mut y = ComplexMatrix::zeros(m, m);
    for h in operators {
        y += h * x * h.adjoint();
    }
    y
}

fn check_input_dim(ch: &KrausChannel, dim: usize) -> Result<()> {
    if dim != ch.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {dim}, channel input dimension {}",
            ch.input_dim
        )));
    }
    Ok(())
}

/// Output state `Σ_k H_k X H_k^H`.
pub fn apply(ch: &KrausChannel, x: &DensityMatrix) -> Result<DensityMatrix> {
    check_input_dim(ch, x.dim())?;
    Ok(DensityMatrix::from_trusted(apply_operators(
        &ch.operators,
        x.matrix(),
    )))
}

/// Channel outputs for an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    /// `Y = Σ p_i Y_i`
    pub average: DensityMatrix,
    /// `Y_i`, one per ensemble member.
    pub outputs: Vec<DensityMatrix>,
}

pub fn apply_ensemble(ch: &KrausChannel, e: &Ensemble) -> Result<EnsembleOutput> {
    check_input_dim(ch, e.dim())?;
    Ok(apply_ensemble_operators(&ch.operators, e))
}

/// Works off-manifold too; used by finite differences.
pub(crate) fn apply_ensemble_operators(
    operators: &[ComplexMatrix],
    e: &Ensemble,
) -> EnsembleOutput {
    let m = operators[0].nrows();
    let mut avg = ComplexMatrix::zeros(m, m);
    let outputs: Vec<DensityMatrix> = e
        .states()
        .iter()
        .map(|x| DensityMatrix::from_trusted(apply_operators(operators, x.matrix())))
        .collect();
    for (p, y) in e.probabilities().iter().zip(&outputs) {
        avg += y.matrix().scale(*p);
    }
    EnsembleOutput {
        average: DensityMatrix::from_trusted(avg),
        outputs,
    }
}

/// Maps each `H_k` to `H_k G^{-1/2}` with `G = Σ_k H_k^H H_k`.
///
/// Eigenvalues of `G` below `eig_floor` are clamped. One clamped eigenvalue is
/// tolerated; more than one is reported as a degenerate operator set.
pub fn project_cptp(operators: &[ComplexMatrix], eig_floor: f64) -> Result<KrausChannel> {
    let (m, n) = operator_shape(operators)?;
    if !operators.iter().all(matfun::is_finite) {
        return Err(Error::NonFinite);
    }
    let g = gram(operators);
    let eig = matfun::eig_hermitian(&g)?;
    let (g_inv_sqrt, clamped) = matfun::inv_sqrt_from_eig(&eig, eig_floor);
    if clamped > 1 {
        return Err(Error::DegenerateGram {
            clamped,
            floor: eig_floor,
        });
    }
    let projected = operators.iter().map(|h| h * &g_inv_sqrt).collect();
    Ok(KrausChannel {
        operators: projected,
        input_dim: n,
        output_dim: m,
    })
}

fn check_feasible(n: usize, m: usize, k: usize) -> Result<()> {
    if n == 0 || m == 0 || k == 0 {
        return Err(Error::InvalidConfig(format!(
            "channel dimensions must be positive (N={n}, M={m}, K={k})"
        )));
    }
    if k * m < n {
        return Err(Error::InfeasibleShape { km: k * m, n });
    }
    Ok(())
}

/// Random channel: i.i.d. `CN(0, 1)` Kraus entries, then `G^{-1/2}`
/// normalization. Draws are row-major per operator, operators in order.
pub fn random_channel_with<R: Rng>(
    n: usize,
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<KrausChannel> {
    check_feasible(n, m, k)?;
    // CN(0,1): real and imaginary parts each N(0, 1/2).
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let operators: Vec<ComplexMatrix> = (0..k)
        .map(|_| {
            ComplexMatrix::from_row_iterator(
                m,
                n,
                (0..m * n).map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * scale, im * scale)
                }),
            )
        })
        .collect();
    project_cptp(&operators, matfun::DEFAULT_EIG_FLOOR)
}

/// Seeded convenience wrapper around [`random_channel_with`] (ChaCha8).
pub fn random_channel(n: usize, m: usize, k: usize, seed: u64) -> Result<KrausChannel> {
    random_channel_with(n, m, k, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Constant channel sending every state to `I_M / M`, with Kraus operators
/// `H_(m,n) = e_m e_n^H / √M` (K = M·N).
pub fn depolarizing_to_max_mixed(n: usize, m: usize) -> KrausChannel {
    let amp = Complex64::new(1.0 / (m as f64).sqrt(), 0.0);
    let mut operators = Vec::with_capacity(n * m);
    for row in 0..m {
        for col in 0..n {
            let mut h = ComplexMatrix::zeros(m, n);
            h[(row, col)] = amp;
            operators.push(h);
        }
    }
    KrausChannel {
        operators,
        input_dim: n,
        output_dim: m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfun::testutil::*;
    use crate::matfun::{from_real_rows, identity, real_diagonal, DEFAULT_EIG_FLOOR};
    use crate::states::{mix, pure_to_density, validate_density, PureState};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_density<R: Rng>(rng: &mut R, n: usize) -> DensityMatrix {
        let a = gaussian_matrix(rng, n, n);
        let rho = &a * a.adjoint();
        let tr = matfun::trace(&rho).re;
        DensityMatrix::from_trusted(rho.unscale(tr))
    }

    fn random_ensemble<R: Rng>(rng: &mut R, n: usize, p: usize) -> Ensemble {
        let w: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let states: Vec<_> = (0..p)
            .map(|_| {
                PureState::normalized(gaussian_matrix(rng, n, 1).column(0).into_owned()).unwrap()
            })
            .collect();
        Ensemble::from_pure(w.iter().map(|x| x / total).collect(), &states).unwrap()
    }

    #[test]
    fn new_rejects_incomplete_and_mismatched() {
        assert!(matches!(
            KrausChannel::new(vec![identity(2).scale(2.0)]),
            Err(Error::NotTracePreserving { .. })
        ));
        assert!(matches!(
            KrausChannel::new(vec![identity(2), ComplexMatrix::zeros(3, 2)]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            KrausChannel::new(vec![]),
            Err(Error::EmptyOperatorSet)
        ));
    }

    #[test]
    fn apply_examples() {
        let mut r = rng(20);
        let x = random_density(&mut r, 3);
        let y = apply(&KrausChannel::identity(3), &x).unwrap();
        assert!((y.matrix() - x.matrix()).norm() < 1e-15);

        let flip = KrausChannel::new(vec![from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])]).unwrap();
        let y = apply(&flip, &pure_to_density(&PureState::basis(2, 0))).unwrap();
        assert_eq!(*y.matrix(), real_diagonal(&[0.0, 1.0]));

        assert!(matches!(
            apply(&flip, &random_density(&mut r, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn apply_preserves_trace_and_positivity() {
        let mut r = rng(21);
        for seed in 0..100 {
            let ch = random_channel(3, 4, 5, seed).unwrap();
            let x = random_density(&mut r, 3);
            let y = apply(&ch, &x).unwrap();
            assert_abs_diff_eq!(matfun::trace(y.matrix()).re, 1.0, epsilon = 1e-10);
            let eig = matfun::eig_hermitian(y.matrix()).unwrap();
            assert!(eig.min_eigenvalue() >= -1e-9);
            assert!(validate_density(y.matrix(), 1e-8).is_valid());
        }
    }

    #[test]
    fn apply_ensemble_linearity() {
        let mut r = rng(22);
        for seed in 0..50 {
            let ch = random_channel(3, 4, 5, seed).unwrap();
            let e = random_ensemble(&mut r, 3, 3);
            let out = apply_ensemble(&ch, &e).unwrap();
            let direct = apply(&ch, &mix(&e)).unwrap();
            assert!((out.average.matrix() - direct.matrix()).norm() < 1e-10);
            for (x, y) in e.states().iter().zip(&out.outputs) {
                assert_eq!(apply(&ch, x).unwrap(), *y);
            }
        }
    }

    #[test]
    fn apply_ensemble_trivial_cases() {
        let mut r = rng(23);
        let e = random_ensemble(&mut r, 2, 1);
        let ch = random_channel(2, 3, 2, 1).unwrap();
        let out = apply_ensemble(&ch, &e).unwrap();
        assert!((out.average.matrix() - out.outputs[0].matrix()).norm() < 1e-15);

        let e = random_ensemble(&mut r, 3, 3);
        let out = apply_ensemble(&KrausChannel::identity(3), &e).unwrap();
        for (x, y) in e.states().iter().zip(&out.outputs) {
            assert!((x.matrix() - y.matrix()).norm() < 1e-15);
        }
        assert!((out.average.matrix() - mix(&e).matrix()).norm() < 1e-15);
    }

    #[test]
    fn project_examples() {
        let ch = random_channel(3, 4, 5, 7).unwrap();
        let again = project_cptp(ch.operators(), DEFAULT_EIG_FLOOR).unwrap();
        for (a, b) in ch.operators().iter().zip(again.operators()) {
            assert!((a - b).norm() < 1e-12);
        }

        let scaled = project_cptp(&[identity(3).scale(2.0)], DEFAULT_EIG_FLOOR).unwrap();
        assert!((&scaled.operators()[0] - identity(3)).norm() < 1e-15);

        let mut r = rng(24);
        let ops: Vec<_> = (0..5).map(|_| gaussian_matrix(&mut r, 4, 3)).collect();
        assert!(
            project_cptp(&ops, DEFAULT_EIG_FLOOR)
                .unwrap()
                .completeness_residual()
                < 1e-10
        );
    }

    #[test]
    fn project_idempotent() {
        let mut r = rng(25);
        for _ in 0..50 {
            let ops: Vec<_> = (0..3).map(|_| gaussian_matrix(&mut r, 2, 4)).collect();
            let once = project_cptp(&ops, DEFAULT_EIG_FLOOR).unwrap();
            let twice = project_cptp(once.operators(), DEFAULT_EIG_FLOOR).unwrap();
            for (a, b) in once.operators().iter().zip(twice.operators()) {
                assert!((a - b).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn project_flags_degenerate_sets() {
        // rank(G) = 1 with N = 3: two clamped eigenvalues
        let mut h = ComplexMatrix::zeros(2, 3);
        h[(0, 0)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            project_cptp(&[h.clone()], DEFAULT_EIG_FLOOR),
            Err(Error::DegenerateGram { clamped: 2, .. })
        ));
        // one missing direction is tolerated
        let mut h2 = ComplexMatrix::zeros(2, 3);
        h2[(1, 1)] = Complex64::new(1.0, 0.0);
        assert!(project_cptp(&[h, h2], DEFAULT_EIG_FLOOR).is_ok());
    }

    #[test]
    fn random_channel_examples() {
        let ch = random_channel(1, 1, 1, 3).unwrap();
        assert_abs_diff_eq!(ch.operators()[0][(0, 0)].norm(), 1.0, epsilon = 1e-14);

        assert_eq!(
            random_channel(3, 4, 5, 99).unwrap(),
            random_channel(3, 4, 5, 99).unwrap()
        );
        assert_ne!(
            random_channel(3, 4, 5, 99).unwrap(),
            random_channel(3, 4, 5, 100).unwrap()
        );

        assert!(matches!(
            random_channel(5, 2, 2, 0),
            Err(Error::InfeasibleShape { km: 4, n: 5 })
        ));
    }

    #[test]
    fn random_channel_sweep_is_complete() {
        for seed in 0..1000 {
            let ch = random_channel(3, 4, 5, seed).unwrap();
            assert!(ch.completeness_residual() < 1e-10);
        }
    }

    #[test]
    fn depolarizing_fixture() {
        let ch = depolarizing_to_max_mixed(3, 4);
        assert_eq!(ch.kraus_rank(), 12);
        assert!(ch.completeness_residual() < 1e-15);
        let mut r = rng(26);
        for _ in 0..10 {
            let y = apply(&ch, &random_density(&mut r, 3)).unwrap();
            assert!((y.matrix() - identity(4).unscale(4.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn left_unitary_keeps_completeness() {
        let mut r = rng(27);
        for seed in 0..20 {
            let ch = random_channel(3, 4, 5, seed).unwrap();
            let u = random_unitary(&mut r, 4);
            let rotated = ch.left_multiply(&u).unwrap();
            assert!((rotated.completeness_residual() - ch.completeness_residual()).abs() < 1e-12);
        }
    }

    #[test]
    fn same_action_ignores_representation() {
        let ch = random_channel(2, 3, 3, 5).unwrap();
        // Mixing operators by a K×K unitary leaves the map unchanged.
        let mut r = rng(28);
        let w = random_unitary(&mut r, 3);
        let ops = ch.operators();
        let mixed: Vec<ComplexMatrix> = (0..3)
            .map(|j| {
                let mut acc = ComplexMatrix::zeros(3, 2);
                for (k, h) in ops.iter().enumerate() {
                    acc += h * w[(j, k)];
                }
                acc
            })
            .collect();
        let other = KrausChannel::new(mixed).unwrap();
        assert_ne!(ch, other);
        assert!(ch.same_action(&other, 1e-12));
        assert!(!ch.same_action(&random_channel(2, 3, 3, 6).unwrap(), 1e-6));
    }
}
