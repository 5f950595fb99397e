//! Projected gradient ascent over Kraus operators, plus the input-ensemble
//! baseline used for comparisons.
//!
//! One channel iteration computes `∂C/∂H_k` for every `k` at the current
//! point, takes the additive step `H_k + α ∂C/∂H_k`, and restores
//! completeness with `H_k G^{-1/2}`. The per-operator variant
//! ([`ProjectionMode::PerOperator`]) instead updates and re-projects after
//! each `k`, recomputing the gradient in between.

use std::fmt;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{self, project_cptp, KrausChannel};
use crate::error::{Error, Result};
use crate::holevo::{holevo_bound, holevo_gradient};
use crate::matfun::{self, ComplexMatrix, DEFAULT_EIG_FLOOR};
use crate::states::{spectral_entropy, PureEnsemble, PureState};

/// Where the completeness projection happens within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// All `K` operators step from the same gradient, then one projection.
    #[default]
    PerSweep,
    /// Step and project one operator at a time, in index order.
    PerOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    /// α, applied to the natural-log gradient.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once `|C_t − C_{t−1}|` (bits) falls below this.
    pub improvement_threshold: f64,
    pub eig_floor: f64,
    pub record_trace: bool,
    pub projection: ProjectionMode,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            step_size: 0.3,
            max_iters: 100,
            improvement_threshold: 1e-6,
            eig_floor: DEFAULT_EIG_FLOOR,
            record_trace: true,
            projection: ProjectionMode::PerSweep,
        }
    }
}

pub const MAX_STEP_SIZE: f64 = 10.0;
pub const MAX_ITERS_LIMIT: usize = 1_000_000;

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= MAX_STEP_SIZE) {
            return Err(Error::InvalidConfig(format!(
                "step size {} outside (0, {MAX_STEP_SIZE}]",
                self.step_size
            )));
        }
        if self.max_iters == 0 || self.max_iters > MAX_ITERS_LIMIT {
            return Err(Error::InvalidConfig(format!(
                "max_iters {} outside [1, {MAX_ITERS_LIMIT}]",
                self.max_iters
            )));
        }
        if !(self.improvement_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "improvement threshold must be >= 0".into(),
            ));
        }
        if !(self.eig_floor > 0.0 && self.eig_floor.is_finite()) {
            return Err(Error::InvalidConfig(
                "eigenvalue floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminationStatus {
    ThresholdReached,
    MaxIters,
    Error(String),
}

impl fmt::Display for TerminationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationStatus::ThresholdReached => f.write_str("threshold-reached"),
            TerminationStatus::MaxIters => f.write_str("max-iters"),
            TerminationStatus::Error(msg) => write!(f, "error: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub holevo_bits: f64,
    /// Frobenius norm of the gradient used for this iteration's step.
    pub grad_norm: f64,
    /// Completeness residual of the channel after this iteration.
    pub cptp_residual: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimTrace {
    pub initial_bits: f64,
    pub best_bits: f64,
    /// 0 when the starting point was never improved on.
    pub best_iteration: usize,
    pub iterations: usize,
    pub status: TerminationStatus,
    /// Empty unless `record_trace` was set.
    pub records: Vec<IterationRecord>,
}

impl OptimTrace {
    fn start(initial_bits: f64) -> Self {
        Self {
            initial_bits,
            best_bits: initial_bits,
            best_iteration: 0,
            iterations: 0,
            status: TerminationStatus::MaxIters,
            records: Vec::new(),
        }
    }

    /// Largest completeness residual among the recorded iterations.
    pub fn max_cptp_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.cptp_residual)
            .fold(0.0, f64::max)
    }

    /// Consecutive differences of the raw per-iteration objective, starting
    /// from the initial value.
    pub fn raw_changes(&self) -> Vec<f64> {
        let mut prev = self.initial_bits;
        self.records
            .iter()
            .map(|r| {
                let d = r.holevo_bits - prev;
                prev = r.holevo_bits;
                d
            })
            .collect()
    }
}

/// An optimization run that stopped on an error; the trace holds the
/// iterations completed before it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub trace: OptimTrace,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "optimization stopped after {} iterations: {}",
            self.trace.iterations, self.error
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        Error::Optimization {
            iteration: f.trace.iterations + 1,
            source: Box::new(f.error),
        }
    }
}

/// Shared loop: best-seen tracking, stop rule and trace bookkeeping.
struct Ascent<'a> {
    cfg: &'a OptimConfig,
    trace: OptimTrace,
    prev_bits: f64,
    clock: Instant,
}

enum Next {
    Continue,
    Stop,
}

impl<'a> Ascent<'a> {
    fn new(cfg: &'a OptimConfig, initial_bits: f64) -> Self {
        Self {
            cfg,
            trace: OptimTrace::start(initial_bits),
            prev_bits: initial_bits,
            clock: Instant::now(),
        }
    }

    /// Returns whether the new point is the best so far, and whether to stop.
    fn observe(&mut self, bits: f64, grad_norm: f64, cptp_residual: f64) -> (bool, Next) {
        let iteration = self.trace.iterations + 1;
        self.trace.iterations = iteration;
        if self.cfg.record_trace {
            self.trace.records.push(IterationRecord {
                iteration,
                holevo_bits: bits,
                grad_norm,
                cptp_residual,
                elapsed_ms: self.clock.elapsed().as_secs_f64() * 1e3,
            });
        }
        let improved = bits > self.trace.best_bits;
        if improved {
            self.trace.best_bits = bits;
            self.trace.best_iteration = iteration;
        }
        let converged = (bits - self.prev_bits).abs() < self.cfg.improvement_threshold;
        self.prev_bits = bits;
        if converged {
            self.trace.status = TerminationStatus::ThresholdReached;
            (improved, Next::Stop)
        } else if iteration >= self.cfg.max_iters {
            self.trace.status = TerminationStatus::MaxIters;
            (improved, Next::Stop)
        } else {
            (improved, Next::Continue)
        }
    }

    fn fail(mut self, error: Error) -> RunFailure {
        self.trace.status = TerminationStatus::Error(error.to_string());
        RunFailure {
            error,
            trace: self.trace,
        }
    }
}

fn step_operators(
    operators: &[ComplexMatrix],
    grad: &[ComplexMatrix],
    alpha: f64,
) -> Vec<ComplexMatrix> {
    operators
        .iter()
        .zip(grad)
        .map(|(h, g)| h + g.scale(alpha))
        .collect()
}

/// One sweep; returns the new channel and the norm of the gradient at the
/// starting point.
fn sweep(
    ch: &KrausChannel,
    e: &crate::states::Ensemble,
    cfg: &OptimConfig,
) -> Result<(KrausChannel, f64)> {
    let grad = holevo_gradient(ch, e, cfg.eig_floor)?;
    let grad_norm = grad.frobenius_norm();
    match cfg.projection {
        ProjectionMode::PerSweep => {
            let stepped = step_operators(ch.operators(), &grad.per_operator, cfg.step_size);
            Ok((project_cptp(&stepped, cfg.eig_floor)?, grad_norm))
        }
        ProjectionMode::PerOperator => {
            let mut current = ch.clone();
            let mut grad_k = grad;
            for k in 0..ch.kraus_rank() {
                if k > 0 {
                    grad_k = holevo_gradient(&current, e, cfg.eig_floor)?;
                }
                let mut ops = current.into_operators();
                ops[k] += grad_k.per_operator[k].scale(cfg.step_size);
                current = project_cptp(&ops, cfg.eig_floor)?;
            }
            Ok((current, grad_norm))
        }
    }
}

/// One projected ascent step.
pub fn ga_step(
    ch: &KrausChannel,
    e: &crate::states::Ensemble,
    cfg: &OptimConfig,
) -> Result<KrausChannel> {
    cfg.validate()?;
    Ok(sweep(ch, e, cfg)?.0)
}

/// Runs projected gradient ascent from `ch0` and returns the best channel
/// seen together with the trace.
pub fn optimize_channel(
    ch0: &KrausChannel,
    e: &crate::states::Ensemble,
    cfg: &OptimConfig,
) -> std::result::Result<(KrausChannel, OptimTrace), RunFailure> {
    let early = |error: Error| RunFailure {
        error,
        trace: OptimTrace::start(f64::NAN),
    };
    cfg.validate().map_err(early)?;
    let initial = holevo_bound(ch0, e).map_err(early)?.bound_bits;

    let mut ascent = Ascent::new(cfg, initial);
    let mut best = ch0.clone();
    let mut current = ch0.clone();
    loop {
        let step = sweep(&current, e, cfg).and_then(|(next, grad_norm)| {
            let bits = holevo_bound(&next, e)?.bound_bits;
            Ok((next, grad_norm, bits))
        });
        let (next, grad_norm, bits) = match step {
            Ok(v) => v,
            Err(err) => return Err(ascent.fail(err)),
        };
        if !bits.is_finite() {
            return Err(ascent.fail(Error::NonFinite));
        }
        let (improved, what) = ascent.observe(bits, grad_norm, next.completeness_residual());
        if improved {
            best = next.clone();
        }
        current = next;
        if let Next::Stop = what {
            break;
        }
    }
    Ok((best, ascent.trace))
}

/// Independent runs from the same starting channel, one per step size.
pub fn sweep_step_sizes(
    ch0: &KrausChannel,
    e: &crate::states::Ensemble,
    step_sizes: &[f64],
    cfg: &OptimConfig,
) -> Result<Vec<(KrausChannel, OptimTrace)>> {
    if step_sizes.is_empty() {
        return Err(Error::InvalidConfig("empty step-size list".into()));
    }
    step_sizes
        .par_iter()
        .map(|&alpha| {
            let cfg = OptimConfig {
                step_size: alpha,
                ..cfg.clone()
            };
            optimize_channel(ch0, e, &cfg).map_err(Error::from)
        })
        .collect()
}

/// Euclidean projection onto `{p : p ≥ 0, Σ p = 1}` (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Gradient of `C` (natural-log units) with respect to the ensemble
/// parameters, channel fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    /// `∂C/∂p_i = −Tr(Y_i ln Y) − S(Y_i)`, up to a common constant.
    pub probabilities: Vec<f64>,
    /// `2 p_i Φ†(ln Y_i − ln Y) x_i`, the real-parameter gradient in each
    /// amplitude vector (before renormalization).
    pub states: Vec<DVector<Complex64>>,
}

impl InputGradient {
    pub fn norm(&self) -> f64 {
        let p: f64 = self.probabilities.iter().map(|x| x * x).sum();
        let s: f64 = self.states.iter().map(|v| v.norm_squared()).sum();
        (p + s).sqrt()
    }
}

/// Gradient of the Holevo quantity in the ensemble parameters.
pub fn input_gradient(
    ch: &KrausChannel,
    e: &PureEnsemble,
    eig_floor: f64,
) -> Result<InputGradient> {
    if ch.input_dim() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble of dimension {}, channel input dimension {}",
            e.dim(),
            ch.input_dim()
        )));
    }
    let out = channel::apply_ensemble(ch, &e.to_ensemble())?;
    let avg_eig = matfun::eig_hermitian(out.average.matrix())?;
    let ln_avg = matfun::log_from_eig(&avg_eig, std::f64::consts::E, eig_floor);

    let mut grad_p = Vec::with_capacity(e.len());
    let mut grad_x = Vec::with_capacity(e.len());
    for ((y_i, x_i), &p_i) in out.outputs.iter().zip(e.states()).zip(e.probabilities()) {
        let eig = matfun::eig_hermitian(y_i.matrix())?;
        let s_i = spectral_entropy(eig.eigenvalues.iter().copied(), std::f64::consts::E);
        let cross = (y_i.matrix() * &ln_avg).trace().re;
        grad_p.push(-cross - s_i);

        let diff = matfun::log_from_eig(&eig, std::f64::consts::E, eig_floor) - &ln_avg;
        let n = e.dim();
        let mut pulled_back = ComplexMatrix::zeros(n, n);
        for h in ch.operators() {
            pulled_back += h.adjoint() * &diff * h;
        }
        grad_x.push((pulled_back * x_i.amplitudes()).scale(2.0 * p_i));
    }
    Ok(InputGradient {
        probabilities: grad_p,
        states: grad_x,
    })
}

fn pure_holevo_bits(ch: &KrausChannel, e: &PureEnsemble) -> Result<f64> {
    Ok(holevo_bound(ch, &e.to_ensemble())?.bound_bits)
}

/// Baseline: projected gradient ascent on the ensemble with the channel
/// fixed. Each iteration takes a probability step (projected onto the
/// simplex) and then an amplitude step at the updated probabilities
/// (renormalized to unit norm).
pub fn optimize_input(
    ch: &KrausChannel,
    e0: &PureEnsemble,
    cfg: &OptimConfig,
) -> std::result::Result<(PureEnsemble, OptimTrace), RunFailure> {
    let early = |error: Error| RunFailure {
        error,
        trace: OptimTrace::start(f64::NAN),
    };
    cfg.validate().map_err(early)?;
    let initial = pure_holevo_bits(ch, e0).map_err(early)?;
    let residual = ch.completeness_residual();

    let mut ascent = Ascent::new(cfg, initial);
    let mut best = e0.clone();
    let mut current = e0.clone();
    loop {
        let step = input_step(ch, &current, cfg).and_then(|(next, grad_norm)| {
            let bits = pure_holevo_bits(ch, &next)?;
            Ok((next, grad_norm, bits))
        });
        let (next, grad_norm, bits) = match step {
            Ok(v) => v,
            Err(err) => return Err(ascent.fail(err)),
        };
        let (improved, what) = ascent.observe(bits, grad_norm, residual);
        if improved {
            best = next.clone();
        }
        current = next;
        if let Next::Stop = what {
            break;
        }
    }
    Ok((best, ascent.trace))
}

fn input_step(
    ch: &KrausChannel,
    e: &PureEnsemble,
    cfg: &OptimConfig,
) -> Result<(PureEnsemble, f64)> {
    let alpha = cfg.step_size;
    let g = input_gradient(ch, e, cfg.eig_floor)?;
    let moved: Vec<f64> = e
        .probabilities()
        .iter()
        .zip(&g.probabilities)
        .map(|(p, d)| p + alpha * d)
        .collect();
    let probabilities = project_simplex(&moved);
    let after_p = PureEnsemble::new(probabilities.clone(), e.states().to_vec())?;

    let gx = input_gradient(ch, &after_p, cfg.eig_floor)?;
    let states = e
        .states()
        .iter()
        .zip(&gx.states)
        .map(|(x, d)| PureState::normalized(x.amplitudes() + d.scale(alpha)))
        .collect::<Result<Vec<_>>>()?;
    let grad_norm = (g.probabilities.iter().map(|x| x * x).sum::<f64>()
        + gx.states.iter().map(|v| v.norm_squared()).sum::<f64>())
    .sqrt();
    Ok((PureEnsemble::new(probabilities, states)?, grad_norm))
}

/// Holevo quantity of the ensemble itself (identity channel), in bits. Any
/// channel output is bounded by it.
pub fn input_holevo_bits(e: &PureEnsemble) -> Result<f64> {
    pure_holevo_bits(&KrausChannel::identity(e.dim()), e)
}
