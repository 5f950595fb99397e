//! Experiment plumbing behind the `holevo` binary: random instances,
//! experiment runners, and file formats.

pub mod experiments;
pub mod io;
pub mod streams;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optimizer::{IterationRecord, OptimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Gradient ascent over the Kraus operators, ensemble fixed.
    ChannelOpt,
    /// Gradient ascent over probabilities and state vectors, channel fixed.
    InputOpt,
    /// The random starting point, unoptimized.
    None,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::ChannelOpt, Scheme::InputOpt, Scheme::None];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::ChannelOpt => "channel-opt",
            Scheme::InputOpt => "input-opt",
            Scheme::None => "none",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Convergence,
    DimSweep,
    KrausSweep,
    GradCheck,
    SingleEval,
}

pub const DEFAULT_ALPHAS: [f64; 4] = [0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Everything a runner needs. `p = None` means one input state per input
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub p: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub optim: OptimConfig,
    pub alphas: Vec<f64>,
    /// Values of `N = M` for the dimension sweep.
    pub dims: Vec<usize>,
    /// Kraus ranks for the rank sweep.
    pub kraus_ranks: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub fd_step: f64,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario) -> Self {
        let (n, m) = match scenario {
            Scenario::KrausSweep => (4, 4),
            _ => (3, 4),
        };
        Self {
            scenario,
            n,
            m,
            k: 5,
            p: None,
            trials: 20,
            seed: 0,
            optim: OptimConfig::default(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            dims: (2..=6).collect(),
            kraus_ranks: (1..=8).collect(),
            schemes: Scheme::ALL.to_vec(),
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn states_for(&self, n: usize) -> usize {
        self.p.unwrap_or(n)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidConfig(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("n", self.n)?;
        positive("m", self.m)?;
        positive("k", self.k)?;
        positive("trials", self.trials)?;
        if let Some(p) = self.p {
            positive("p", p)?;
        }
        self.optim.validate()?;
        match self.scenario {
            Scenario::Convergence if self.alphas.is_empty() => {
                return Err(Error::InvalidConfig("empty step-size list".into()))
            }
            Scenario::DimSweep if self.dims.is_empty() || self.dims.contains(&0) => {
                return Err(Error::InvalidConfig(
                    "dimension list must be non-empty and positive".into(),
                ))
            }
            Scenario::KrausSweep
                if self.kraus_ranks.is_empty() || self.kraus_ranks.contains(&0) =>
            {
                return Err(Error::InvalidConfig(
                    "Kraus rank list must be non-empty and positive".into(),
                ))
            }
            Scenario::DimSweep | Scenario::KrausSweep if self.schemes.is_empty() => {
                return Err(Error::InvalidConfig("no schemes selected".into()))
            }
            _ => {}
        }
        for &a in &self.alphas {
            OptimConfig {
                step_size: a,
                ..self.optim.clone()
            }
            .validate()?;
        }
        Ok(())
    }
}

/// Outcome of one scheme on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub initial_bits: f64,
    pub final_bits: f64,
    pub iterations: usize,
    pub trace: Option<Vec<IterationRecord>>,
    pub runtime_ms: f64,
}

/// Per-iteration cost of a channel sweep, for logging. Dominated by the
/// `P + 1` eigendecompositions of `M × M` outputs and the `K · P` products
/// forming them.
pub fn iteration_cost(n: usize, m: usize, k: usize, p: usize) -> f64 {
    let (n, m, k, p) = (n as f64, m as f64, k as f64, p as f64);
    (p + 1.0) * m.powi(3) + k * p * (m * n * n + m * m * n) + n.powi(3)
}
