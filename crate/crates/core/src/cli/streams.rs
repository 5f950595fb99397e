//! Deterministic random streams.
//!
//! Every random draw comes from ChaCha8 seeded with the run seed. Each
//! `(trial, purpose)` pair selects its own ChaCha stream,
//! `stream = trial << 8 | purpose`, so trials are independent of each other
//! and of execution order. The stream does not depend on the sweep point:
//! within a trial, every sweep point and every scheme starts from the same
//! draws (paired comparison).

use nalgebra::DVector;
use num_complex::Complex64;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{self, KrausChannel};
use crate::error::Result;
use crate::states::{PureEnsemble, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Ensemble = 0,
    Channel = 1,
}

pub fn stream_rng(seed: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 8) | purpose as u64);
    rng
}

/// Random pure-state ensemble: `p_i = u_i / Σ u_j` with `u_i ~ U(0, 1)`, then
/// `x_i ~ CN(0, I_N)` normalized. Probabilities are drawn first.
pub fn random_ensemble_with<R: Rng>(n: usize, p: usize, rng: &mut R) -> Result<PureEnsemble> {
    let u: Vec<f64> = (0..p).map(|_| rng.sample(Open01)).collect();
    let total: f64 = u.iter().sum();
    let probabilities = u.iter().map(|x| x / total).collect();
    let states = (0..p)
        .map(|_| {
            let v = DVector::from_iterator(
                n,
                (0..n).map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im)
                }),
            );
            PureState::normalized(v)
        })
        .collect::<Result<Vec<_>>>()?;
    PureEnsemble::new(probabilities, states)
}

pub fn random_ensemble(n: usize, p: usize, seed: u64) -> Result<PureEnsemble> {
    random_ensemble_with(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// The `(ensemble, channel)` pair for one trial.
pub fn trial_instance(
    seed: u64,
    trial: u64,
    n: usize,
    m: usize,
    k: usize,
    p: usize,
) -> Result<(PureEnsemble, KrausChannel)> {
    let e = random_ensemble_with(n, p, &mut stream_rng(seed, trial, Purpose::Ensemble))?;
    let ch = channel::random_channel_with(n, m, k, &mut stream_rng(seed, trial, Purpose::Channel))?;
    Ok((e, ch))
}
