//! Monte Carlo simulation of the hidden process under a scheduling rule.
//!
//! Random streams: trajectory `i` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s ^ i)`. Within a trajectory the draw order is
//! fixed: the initial state of every project (index order), then per slot
//! the next state of every project (index order) followed by the worked
//! project's observation. Each draw is one uniform variate inverted through
//! the cumulative distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::belief::ModelInstance;
use crate::error::{Error, Result};
use crate::filter::{step_profile, BeliefProfile};
use crate::policy::PolicyRule;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `states[n][t]`: hidden state of project `n` at slot `t`.
    pub states: Vec<Vec<usize>>,
    pub actions: Vec<usize>,
    /// Observation emitted by the worked project after its slot-`t` transition.
    pub observations: Vec<usize>,
    pub rewards: Vec<f64>,
    pub discounted_total: f64,
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the total mass: take the last supported index.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

fn run_trajectory<R: Rng>(
    inst: &ModelInstance,
    policy: &dyn PolicyRule,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let n = inst.n_projects();
    let (a, b, r) = (inst.transition(), inst.observation(), inst.reward());
    let mut current: Vec<usize> = inst
        .initial_beliefs()
        .iter()
        .map(|x| draw(rng, x.as_slice()))
        .collect();
    let mut states: Vec<Vec<usize>> = current.iter().map(|s| vec![*s]).collect();
    let mut profile = BeliefProfile::initial(inst);
    let mut actions = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon + 1);
    let mut rewards = Vec::with_capacity(horizon + 1);
    let mut discounted_total = 0.0;
    let mut discount = 1.0;

    for t in 0..=horizon {
        let u = policy.action(inst, &profile)?;
        if u >= n {
            return Err(Error::IndexOutOfRange { index: u, len: n });
        }
        let reward = r.as_slice()[current[u]];
        discounted_total += discount * reward;
        discount *= inst.beta();
        for s in current.iter_mut() {
            *s = draw(rng, a.row(*s));
        }
        let y = draw(rng, b.row(current[u]));
        actions.push(u);
        observations.push(y);
        rewards.push(reward);
        if t < horizon {
            for (hist, s) in states.iter_mut().zip(&current) {
                hist.push(*s);
            }
            profile = step_profile(inst, &profile, u, y)?;
        }
    }
    Ok(Trajectory {
        states,
        actions,
        observations,
        rewards,
        discounted_total,
    })
}

/// One trajectory over slots `0..=horizon`, deterministic in `seed`.
pub fn sample_trajectory(
    inst: &ModelInstance,
    policy: &dyn PolicyRule,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    run_trajectory(inst, policy, horizon, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_traj: usize,
    pub seed: u64,
}

/// Pairwise (cascade) summation; the result does not depend on how work
/// was split across threads.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Discounted totals of `n_traj` independent trajectories.
pub fn simulate_totals(
    inst: &ModelInstance,
    policy: &dyn PolicyRule,
    horizon: usize,
    n_traj: usize,
    seed: u64,
    parallel: bool,
) -> Result<Vec<f64>> {
    let one = |i: usize| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
        Ok(run_trajectory(inst, policy, horizon, &mut rng)?.discounted_total)
    };
    if parallel {
        (0..n_traj).into_par_iter().map(one).collect()
    } else {
        (0..n_traj).map(one).collect()
    }
}

/// Sample mean and standard error of totals. Deviations are taken from the
/// first total, so identical totals give a standard error of exactly zero.
pub fn summarize(totals: &[f64], seed: u64) -> ValueEstimate {
    let n = totals.len();
    let shift = totals[0];
    let dev: Vec<f64> = totals.iter().map(|x| x - shift).collect();
    let sq: Vec<f64> = dev.iter().map(|d| d * d).collect();
    let s1 = pairwise_sum(&dev);
    let s2 = pairwise_sum(&sq);
    let mean = shift + s1 / n as f64;
    let var = ((s2 - s1 * s1 / n as f64) / (n as f64 - 1.0)).max(0.0);
    ValueEstimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        n_traj: n,
        seed,
    }
}

/// Monte Carlo estimate of the policy's expected discounted reward.
pub fn estimate_value(
    inst: &ModelInstance,
    policy: &dyn PolicyRule,
    horizon: usize,
    n_traj: usize,
    seed: u64,
    parallel: bool,
) -> Result<ValueEstimate> {
    if n_traj < 2 {
        return Err(Error::InvalidArgument("at least two trajectories are required".into()));
    }
    let totals = simulate_totals(inst, policy, horizon, n_traj, seed, parallel)?;
    Ok(summarize(&totals, seed))
}
