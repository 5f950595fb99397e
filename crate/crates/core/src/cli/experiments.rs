//! Experiment runners. Each returns in-memory results; callers choose how to
//! serialize them. Trials run in parallel and are collected in trial order,
//! so output never depends on scheduling.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::io::fmt_float;
use super::streams::trial_instance;
use super::{iteration_cost, ExperimentSpec, Scheme, TrialRecord};
use crate::channel::{self, KrausChannel};
use crate::error::{Error, Result};
use crate::holevo::{finite_diff_gradient, holevo_bound, holevo_gradient};
use crate::matfun;
use crate::optimizer::{
    input_holevo_bits, optimize_channel, optimize_input, IterationRecord, OptimConfig, OptimTrace,
};
use crate::states::{Ensemble, PureEnsemble};

/// Output eigenvalues above this make a point interior for gradient checks.
pub const INTERIOR_EIG: f64 = 1e-6;
/// Cosine similarity required between analytic and finite-difference
/// gradients.
pub const COSINE_TOL: f64 = 1e-6;
/// Below this norm (nats) both gradients count as vanishing, where the
/// cosine carries no information.
pub const VANISHING_GRAD: f64 = 1e-8;

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn csv(header: &str, lines: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn log_cost(n: usize, m: usize, k: usize, p: usize) {
    log::info!(
        "N={n} M={m} K={k} P={p}: about {:.2e} flops per iteration",
        iteration_cost(n, m, k, p)
    );
}

/// Runs one scheme from a trial's random starting point.
pub fn run_scheme(
    scheme: Scheme,
    channel: &KrausChannel,
    ensemble: &PureEnsemble,
    cfg: &OptimConfig,
    trial: u64,
    seed: u64,
) -> Result<TrialRecord> {
    let clock = Instant::now();
    let from_trace = |trace: OptimTrace| TrialRecord {
        trial,
        seed,
        scheme,
        initial_bits: trace.initial_bits,
        final_bits: trace.best_bits,
        iterations: trace.iterations,
        trace: cfg.record_trace.then_some(trace.records),
        runtime_ms: clock.elapsed().as_secs_f64() * 1e3,
    };
    match scheme {
        Scheme::ChannelOpt => {
            let (_, trace) = optimize_channel(channel, &ensemble.to_ensemble(), cfg)?;
            Ok(from_trace(trace))
        }
        Scheme::InputOpt => {
            let (_, trace) = optimize_input(channel, ensemble, cfg)?;
            Ok(from_trace(trace))
        }
        Scheme::None => {
            let bits = holevo_bound(channel, &ensemble.to_ensemble())?.bound_bits;
            Ok(TrialRecord {
                trial,
                seed,
                scheme,
                initial_bits: bits,
                final_bits: bits,
                iterations: 0,
                trace: None,
                runtime_ms: clock.elapsed().as_secs_f64() * 1e3,
            })
        }
    }
}

/// One row of a single optimization trace.
pub fn trace_csv(records: &[IterationRecord]) -> String {
    csv(
        "iter,holevo_bits,grad_norm,cptp_residual",
        records.iter().map(|r| {
            format!(
                "{},{},{},{}",
                r.iteration,
                fmt_float(r.holevo_bits),
                fmt_float(r.grad_norm),
                fmt_float(r.cptp_residual)
            )
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSizeSummary {
    pub alpha: f64,
    pub median_initial_bits: f64,
    pub median_final_bits: f64,
    pub mean_final_bits: f64,
    /// Best value reached in each trial, in trial order.
    pub final_bits: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// `S(X)` of each trial's input ensemble. No channel can push the Holevo
/// bound above it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputBound {
    pub median_bits: f64,
    pub per_trial_bits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub p: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub improvement_threshold: f64,
    pub step_sizes: Vec<StepSizeSummary>,
    pub input_entropy_bound: InputBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutput {
    /// `runs[trial][alpha_index]`.
    pub runs: Vec<Vec<TrialRecord>>,
    pub summary: ConvergenceSummary,
}

impl ConvergenceOutput {
    pub fn to_csv(&self) -> String {
        let alphas: Vec<f64> = self.summary.step_sizes.iter().map(|s| s.alpha).collect();
        let lines = self.runs.iter().flat_map(|per_alpha| {
            per_alpha.iter().zip(&alphas).flat_map(|(rec, &alpha)| {
                rec.trace.iter().flatten().map(move |r| {
                    format!(
                        "{},{},{},{},{},{}",
                        rec.trial,
                        fmt_float(alpha),
                        r.iteration,
                        fmt_float(r.holevo_bits),
                        fmt_float(r.grad_norm),
                        fmt_float(r.cptp_residual)
                    )
                })
            })
        });
        csv(
            "trial,alpha,iter,holevo_bits,grad_norm,cptp_residual",
            lines,
        )
    }
}

/// Channel optimization from the same random start at every step size.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<ConvergenceOutput> {
    spec.validate()?;
    let p = spec.states_for(spec.n);
    log_cost(spec.n, spec.m, spec.k, p);
    let cfg = OptimConfig {
        record_trace: true,
        ..spec.optim.clone()
    };
    let per_trial = (0..spec.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let (e, ch) = trial_instance(spec.seed, trial, spec.n, spec.m, spec.k, p)?;
            let bound = input_holevo_bits(&e)?;
            let runs = spec
                .alphas
                .iter()
                .map(|&alpha| {
                    let cfg = OptimConfig {
                        step_size: alpha,
                        ..cfg.clone()
                    };
                    run_scheme(Scheme::ChannelOpt, &ch, &e, &cfg, trial, spec.seed)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((runs, bound))
        })
        .collect::<Result<Vec<_>>>()?;

    let (runs, bounds): (Vec<_>, Vec<_>) = per_trial.into_iter().unzip();
    let step_sizes = spec
        .alphas
        .iter()
        .enumerate()
        .map(|(j, &alpha)| {
            let finals: Vec<f64> = runs.iter().map(|r| r[j].final_bits).collect();
            let initials: Vec<f64> = runs.iter().map(|r| r[j].initial_bits).collect();
            StepSizeSummary {
                alpha,
                median_initial_bits: median(&initials),
                median_final_bits: median(&finals),
                mean_final_bits: mean_std(&finals).0,
                iterations: runs.iter().map(|r| r[j].iterations).collect(),
                final_bits: finals,
            }
        })
        .collect();
    let summary = ConvergenceSummary {
        n: spec.n,
        m: spec.m,
        k: spec.k,
        p,
        trials: spec.trials,
        seed: spec.seed,
        max_iters: spec.optim.max_iters,
        improvement_threshold: spec.optim.improvement_threshold,
        step_sizes,
        input_entropy_bound: InputBound {
            median_bits: median(&bounds),
            per_trial_bits: bounds,
        },
    };
    Ok(ConvergenceOutput { runs, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub p: usize,
    pub scheme: String,
    pub trials: usize,
    pub mean_bits: f64,
    pub std_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub p: usize,
    /// `records[trial]` holds one record per scheme, in `ExperimentSpec::schemes`
    /// order.
    pub records: Vec<Vec<TrialRecord>>,
}

impl SweepPoint {
    pub fn finals(&self, scheme: Scheme) -> Vec<f64> {
        self.records
            .iter()
            .flatten()
            .filter(|r| r.scheme == scheme)
            .map(|r| r.final_bits)
            .collect()
    }

    pub fn mean_bits(&self, scheme: Scheme) -> f64 {
        mean_std(&self.finals(scheme)).0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub schemes: Vec<Scheme>,
    pub points: Vec<SweepPoint>,
}

impl SweepOutput {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points
            .iter()
            .flat_map(|pt| {
                self.schemes.iter().map(move |&s| {
                    let finals = pt.finals(s);
                    let (mean_bits, std_bits) = mean_std(&finals);
                    SweepRow {
                        n: pt.n,
                        m: pt.m,
                        k: pt.k,
                        p: pt.p,
                        scheme: s.label().to_string(),
                        trials: finals.len(),
                        mean_bits,
                        std_bits,
                    }
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        csv(
            "n,m,k,p,scheme,trials,mean_bits,std_bits",
            self.rows().into_iter().map(|r| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    r.n,
                    r.m,
                    r.k,
                    r.p,
                    r.scheme,
                    r.trials,
                    fmt_float(r.mean_bits),
                    fmt_float(r.std_bits)
                )
            }),
        )
    }

    pub fn point(&self, n: usize, m: usize, k: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| (p.n, p.m, p.k) == (n, m, k))
    }
}

fn run_sweep(spec: &ExperimentSpec, shapes: Vec<(usize, usize, usize)>) -> Result<SweepOutput> {
    spec.validate()?;
    for &(n, m, k) in &shapes {
        log_cost(n, m, k, spec.states_for(n));
    }
    let jobs: Vec<(usize, u64)> = (0..shapes.len())
        .flat_map(|i| (0..spec.trials as u64).map(move |t| (i, t)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, trial)| {
            let (n, m, k) = shapes[i];
            let (e, ch) = trial_instance(spec.seed, trial, n, m, k, spec.states_for(n))?;
            spec.schemes
                .iter()
                .map(|&s| run_scheme(s, &ch, &e, &spec.optim, trial, spec.seed))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut results = results.into_iter();
    let points = shapes
        .into_iter()
        .map(|(n, m, k)| SweepPoint {
            n,
            m,
            k,
            p: spec.states_for(n),
            records: results.by_ref().take(spec.trials).collect(),
        })
        .collect();
    Ok(SweepOutput {
        schemes: spec.schemes.clone(),
        points,
    })
}

/// Sweeps `N = M` over `spec.dims` at Kraus rank `spec.k`.
pub fn run_dim_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    run_sweep(spec, spec.dims.iter().map(|&d| (d, d, spec.k)).collect())
}

/// Sweeps the Kraus rank over `spec.kraus_ranks` at dimensions `spec.n`,
/// `spec.m`.
pub fn run_kraus_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    run_sweep(
        spec,
        spec.kraus_ranks
            .iter()
            .map(|&k| (spec.n, spec.m, k))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradPoint {
    pub trial: u64,
    pub cosine: f64,
    /// Largest entrywise deviation (nats) for each Kraus operator.
    pub max_deviation: Vec<f64>,
    pub analytic_norm: f64,
    pub finite_diff_norm: f64,
    pub min_output_eigenvalue: f64,
    pub interior: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub fd_step: f64,
    pub points: Vec<GradPoint>,
    pub all_pass: bool,
}

impl GradCheckReport {
    fn from_points(fd_step: f64, points: Vec<GradPoint>) -> Self {
        let all_pass = points.iter().all(|p| p.pass);
        Self {
            fd_step,
            points,
            all_pass,
        }
    }

    pub fn to_csv(&self) -> String {
        csv(
            "trial,cosine,max_deviation,analytic_norm,finite_diff_norm,min_output_eigenvalue,interior,pass",
            self.points.iter().map(|p| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    p.trial,
                    fmt_float(p.cosine),
                    fmt_float(p.max_deviation.iter().copied().fold(0.0, f64::max)),
                    fmt_float(p.analytic_norm),
                    fmt_float(p.finite_diff_norm),
                    fmt_float(p.min_output_eigenvalue),
                    p.interior,
                    p.pass
                )
            }),
        )
    }
}

fn min_output_eigenvalue(ch: &KrausChannel, e: &Ensemble) -> Result<f64> {
    let out = channel::apply_ensemble(ch, e)?;
    std::iter::once(&out.average)
        .chain(&out.outputs)
        .map(|y| Ok(matfun::eig_hermitian(y.matrix())?.min_eigenvalue()))
        .try_fold(f64::INFINITY, |acc, v: Result<f64>| Ok(acc.min(v?)))
}

/// Compares the analytic gradient against central differences at one point.
pub fn grad_check_point(
    ch: &KrausChannel,
    e: &Ensemble,
    fd_step: f64,
    eig_floor: f64,
    trial: u64,
) -> Result<GradPoint> {
    let analytic = holevo_gradient(ch, e, eig_floor)?;
    let fd = finite_diff_gradient(ch, e, fd_step)?.to_natural();
    let analytic_norm = analytic.frobenius_norm();
    let finite_diff_norm = fd.frobenius_norm();
    let vanishing = analytic_norm.max(finite_diff_norm) < VANISHING_GRAD;
    let cosine = if vanishing {
        1.0
    } else {
        analytic.cosine_similarity(&fd)
    };
    let min_eig = min_output_eigenvalue(ch, e)?;
    Ok(GradPoint {
        trial,
        cosine,
        max_deviation: analytic.max_deviation_per_operator(&fd),
        analytic_norm,
        finite_diff_norm,
        min_output_eigenvalue: min_eig,
        interior: min_eig > INTERIOR_EIG,
        pass: cosine > 1.0 - COSINE_TOL,
    })
}

/// Gradient checks at `spec.trials` random points.
pub fn run_grad_check(spec: &ExperimentSpec) -> Result<GradCheckReport> {
    spec.validate()?;
    let p = spec.states_for(spec.n);
    let points = (0..spec.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let (e, ch) = trial_instance(spec.seed, trial, spec.n, spec.m, spec.k, p)?;
            grad_check_point(
                &ch,
                &e.to_ensemble(),
                spec.fd_step,
                spec.optim.eig_floor,
                trial,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradCheckReport::from_points(spec.fd_step, points))
}

/// Gradient check at a single given point.
pub fn grad_check_at(
    ch: &KrausChannel,
    e: &Ensemble,
    fd_step: f64,
    eig_floor: f64,
) -> Result<GradCheckReport> {
    let point = grad_check_point(ch, e, fd_step, eig_floor, 0)?;
    Ok(GradCheckReport::from_points(fd_step, vec![point]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub holevo_bits: f64,
    pub average_output_entropy_bits: f64,
    pub per_state_entropies_bits: Vec<f64>,
    pub completeness_residual: f64,
}

pub fn evaluate(ch: &KrausChannel, e: &Ensemble) -> Result<EvalReport> {
    let r = holevo_bound(ch, e)?;
    Ok(EvalReport {
        holevo_bits: r.bound_bits,
        average_output_entropy_bits: r.average_output_entropy_bits,
        per_state_entropies_bits: r.per_state_entropies_bits,
        completeness_residual: ch.completeness_residual(),
    })
}

/// Fails with a validation error naming the first offending point.
pub fn require_pass(report: &GradCheckReport) -> Result<()> {
    match report.points.iter().find(|p| !p.pass) {
        None => Ok(()),
        Some(p) => Err(Error::InvalidConfig(format!(
            "gradient check failed at trial {}: cosine {}",
            p.trial, p.cosine
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::depolarizing_to_max_mixed;
    use crate::cli::streams::random_ensemble;
    use crate::cli::{Scenario, DEFAULT_FD_STEP};

    fn small(scenario: Scenario) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(scenario);
        spec.trials = 2;
        spec.optim.max_iters = 5;
        spec.seed = 7;
        spec
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn one_iteration_gives_one_row_per_step_size() {
        let mut spec = small(Scenario::Convergence);
        spec.trials = 1;
        spec.optim.max_iters = 1;
        let out = run_convergence(&spec).unwrap();
        let csv = out.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "trial,alpha,iter,holevo_bits,grad_norm,cptp_residual"
        );
        assert_eq!(lines.len(), 1 + spec.alphas.len());
        for (line, alpha) in lines[1..].iter().zip(["0.2", "0.3", "0.4", "0.5"]) {
            assert!(line.starts_with(&format!("0,{alpha},1,")), "{line}");
        }
    }

    #[test]
    fn convergence_is_deterministic() {
        let spec = small(Scenario::Convergence);
        let a = run_convergence(&spec).unwrap();
        let b = run_convergence(&spec).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.summary, b.summary);
        for s in &a.summary.step_sizes {
            for (f, bound) in s
                .final_bits
                .iter()
                .zip(&a.summary.input_entropy_bound.per_trial_bits)
            {
                assert!(*f <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn single_point_sweep_gives_one_row() {
        let mut spec = small(Scenario::DimSweep);
        spec.dims = vec![3];
        spec.schemes = vec![Scheme::None];
        spec.trials = 1;
        let out = run_dim_sweep(&spec).unwrap();
        let csv = out.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("3,3,5,3,none,1,"));
    }

    #[test]
    fn sweep_schemes_share_starting_points() {
        let mut spec = small(Scenario::KrausSweep);
        spec.kraus_ranks = vec![1, 3];
        let out = run_kraus_sweep(&spec).unwrap();
        for pt in &out.points {
            for per_trial in &pt.records {
                let none = per_trial.iter().find(|r| r.scheme == Scheme::None).unwrap();
                for r in per_trial {
                    assert!((r.initial_bits - none.final_bits).abs() < 1e-12);
                    assert!(r.final_bits >= r.initial_bits - 1e-9);
                }
            }
        }
        let k1 = out.point(4, 4, 1).unwrap();
        assert!((k1.mean_bits(Scheme::ChannelOpt) - k1.mean_bits(Scheme::None)).abs() < 1e-6);
    }

    #[test]
    fn grad_check_passes_at_random_points() {
        let mut spec = small(Scenario::GradCheck);
        spec.trials = 3;
        let report = run_grad_check(&spec).unwrap();
        assert!(report.all_pass, "{report:?}");
        assert!(report.points.iter().all(|p| p.interior));
        require_pass(&report).unwrap();
    }

    #[test]
    fn depolarizing_point_has_vanishing_gradient() {
        let e = random_ensemble(3, 3, 1).unwrap().to_ensemble();
        let ch = depolarizing_to_max_mixed(3, 4);
        let report = grad_check_at(&ch, &e, DEFAULT_FD_STEP, 1e-12).unwrap();
        assert!(report.points[0].analytic_norm < 1e-6);
        assert!(report.all_pass);
    }

    #[test]
    fn eval_reports_bookkeeping() {
        let e = random_ensemble(2, 2, 4).unwrap().to_ensemble();
        let r = evaluate(&KrausChannel::identity(2), &e).unwrap();
        let avg: f64 = r
            .per_state_entropies_bits
            .iter()
            .zip(e.probabilities())
            .map(|(s, p)| s * p)
            .sum();
        assert!((r.holevo_bits - (r.average_output_entropy_bits - avg)).abs() < 1e-12);
    }
}
