//! Scheduling rules and exact finite-horizon evaluation.
//!
//! The auxiliary value `W^u_t` is the expected discounted reward of working
//! project `u` at slot `t` and following the myopic rule afterwards:
//!
//! ```text
//! W^u_t = R'x_u + β Σ_m d(x_u, m) W^{û}_{t+1}(profile after (u, m)),   t < T
//! W^u_T = R'x_u
//! ```
//!
//! Evaluation recurses over the full observation tree, so it is exact up to
//! floating point and opt-in branch pruning.

use crate::belief::{BeliefVector, ModelInstance, RewardVector};
use crate::error::{Error, Result};
use crate::filter::{branches, step_profile, BeliefProfile, MIN_LIKELIHOOD};
use crate::orders::sort_by_mlr;

/// Ties in expected reward closer than this resolve to the lowest index.
pub const TIE_TOL: f64 = 1e-12;

/// Default cap on visited tree nodes per evaluation.
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// A deterministic, belief-measurable scheduling rule.
pub trait PolicyRule: Sync {
    fn name(&self) -> String;

    /// Project to work given the current profile (its `time` is the slot).
    fn action(&self, inst: &ModelInstance, profile: &BeliefProfile) -> Result<usize>;
}

/// Project with the largest `R'x`, lowest index among near-ties.
pub fn argmax_reward_action(beliefs: &[BeliefVector], r: &RewardVector) -> usize {
    let values: Vec<f64> = beliefs.iter().map(|x| r.dot(x.as_slice())).collect();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|v| *v >= best - TIE_TOL)
        .unwrap_or(0)
}

/// The MLR-greatest project, lowest index among equals. Fails when two
/// beliefs are not MLR-comparable.
pub fn myopic_action(profile: &BeliefProfile, r: &RewardVector) -> Result<usize> {
    let order = sort_by_mlr(&profile.beliefs)?;
    let best = order[0];
    debug_assert!({
        let values: Vec<f64> = profile.beliefs.iter().map(|x| r.dot(x.as_slice())).collect();
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        values[best] >= max - 1e-9
    });
    Ok(best)
}

/// Myopic rule. On profiles without an MLR-greatest belief it falls back to
/// the expected-reward argmax, which coincides with the MLR choice whenever
/// the latter exists and rewards increase.
#[derive(Debug, Clone, Copy, Default)]
pub struct MyopicPolicy;

impl PolicyRule for MyopicPolicy {
    fn name(&self) -> String {
        "myopic".into()
    }

    fn action(&self, inst: &ModelInstance, profile: &BeliefProfile) -> Result<usize> {
        match myopic_action(profile, inst.reward()) {
            Ok(u) => Ok(u),
            Err(Error::IncomparablePair(..)) => Ok(argmax_reward_action(&profile.beliefs, inst.reward())),
            Err(e) => Err(e),
        }
    }
}

/// Always works the same project.
#[derive(Debug, Clone, Copy)]
pub struct StayOnPolicy(pub usize);

impl PolicyRule for StayOnPolicy {
    fn name(&self) -> String {
        format!("stay-on-{}", self.0 + 1)
    }

    fn action(&self, inst: &ModelInstance, _profile: &BeliefProfile) -> Result<usize> {
        if self.0 >= inst.n_projects() {
            return Err(Error::IndexOutOfRange {
                index: self.0,
                len: inst.n_projects(),
            });
        }
        Ok(self.0)
    }
}

/// Cycles through projects by slot index.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoundRobinPolicy;

impl PolicyRule for RoundRobinPolicy {
    fn name(&self) -> String {
        "round-robin".into()
    }

    fn action(&self, inst: &ModelInstance, profile: &BeliefProfile) -> Result<usize> {
        Ok(profile.time % inst.n_projects())
    }
}

/// Pseudo-random but deterministic: hashes `(seed, time, rounded profile)`.
#[derive(Debug, Clone, Copy)]
pub struct HashedRandomPolicy {
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl PolicyRule for HashedRandomPolicy {
    fn name(&self) -> String {
        format!("random-{}", self.seed)
    }

    fn action(&self, inst: &ModelInstance, profile: &BeliefProfile) -> Result<usize> {
        let mut h = splitmix64(self.seed ^ profile.time as u64);
        for k in profile.memo_key() {
            h = splitmix64(h ^ k as u64);
        }
        Ok((h % inst.n_projects() as u64) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationSettings {
    /// Last slot `T`; the slot-`T` reward is the final term.
    pub horizon: usize,
    pub beta: f64,
    /// Observation branches with likelihood below this are dropped.
    pub prune_epsilon: f64,
    pub node_budget: usize,
}

impl EvaluationSettings {
    pub fn new(inst: &ModelInstance, horizon: usize) -> Self {
        Self {
            horizon,
            beta: inst.beta(),
            prune_epsilon: 0.0,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Value of a policy evaluation with the probability mass lost to pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyValue {
    pub value: f64,
    pub pruned_mass: f64,
    pub nodes: usize,
}

struct Walker<'a> {
    inst: &'a ModelInstance,
    settings: &'a EvaluationSettings,
    nodes: usize,
    pruned_mass: f64,
}

impl<'a> Walker<'a> {
    fn new(inst: &'a ModelInstance, settings: &'a EvaluationSettings) -> Self {
        Self {
            inst,
            settings,
            nodes: 0,
            pruned_mass: 0.0,
        }
    }

    fn visit(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.settings.node_budget {
            return Err(Error::NodeBudgetExceeded {
                budget: self.settings.node_budget,
                n_projects: self.inst.n_projects(),
                n_obs: self.inst.n_obs(),
                horizon: self.settings.horizon,
            });
        }
        Ok(())
    }

    /// Value of working `u` now and following `policy` afterwards. `reach`
    /// is the probability of arriving at this node (for pruning accounting).
    fn value(
        &mut self,
        profile: &BeliefProfile,
        u: usize,
        policy: &dyn PolicyRule,
        reach: f64,
    ) -> Result<f64> {
        self.visit()?;
        let x = profile.beliefs.get(u).ok_or(Error::IndexOutOfRange {
            index: u,
            len: profile.len(),
        })?;
        let now = self.inst.reward().dot(x.as_slice());
        if profile.time >= self.settings.horizon || self.settings.beta == 0.0 {
            return Ok(now);
        }
        let mut future = 0.0;
        for (m, d) in self.likelihoods(x) {
            if d < self.settings.prune_epsilon {
                self.pruned_mass += reach * d;
                continue;
            }
            let next = step_profile(self.inst, profile, u, m)?;
            let v = policy.action(self.inst, &next)?;
            future += d * self.value(&next, v, policy, reach * d)?;
        }
        Ok(now + self.settings.beta * future)
    }

    /// Value under a plan frozen along `reference`: continuation actions are
    /// chosen by `policy` on the reference profile reached by the same
    /// observation history, falling back to the evaluated profile once the
    /// reference history becomes impossible.
    fn planned_value(
        &mut self,
        profile: &BeliefProfile,
        reference: Option<&BeliefProfile>,
        u: usize,
        policy: &dyn PolicyRule,
    ) -> Result<f64> {
        self.visit()?;
        let now = self.inst.reward().dot(profile.beliefs[u].as_slice());
        if profile.time >= self.settings.horizon || self.settings.beta == 0.0 {
            return Ok(now);
        }
        let mut future = 0.0;
        for (m, d) in self.likelihoods(&profile.beliefs[u]) {
            let next = step_profile(self.inst, profile, u, m)?;
            let next_ref = match reference {
                Some(rp) => {
                    let live = self.likelihoods(&rp.beliefs[u]).into_iter().any(|(k, _)| k == m);
                    if live {
                        Some(step_profile(self.inst, rp, u, m)?)
                    } else {
                        None
                    }
                }
                None => None,
            };
            let v = policy.action(self.inst, next_ref.as_ref().unwrap_or(&next))?;
            future += d * self.planned_value(&next, next_ref.as_ref(), v, policy)?;
        }
        Ok(now + self.settings.beta * future)
    }

    fn likelihoods(&self, x: &BeliefVector) -> Vec<(usize, f64)> {
        let b = self.inst.observation();
        let ax = self.inst.transition().transpose_apply(x.as_slice());
        (0..b.n_obs())
            .map(|m| (m, crate::filter::likelihood_of_propagated(b, &ax, m)))
            .filter(|(_, d)| *d > MIN_LIKELIHOOD)
            .collect()
    }
}

fn check_time(profile: &BeliefProfile, settings: &EvaluationSettings) -> Result<()> {
    if profile.time > settings.horizon {
        return Err(Error::InvalidArgument(format!(
            "slot {} lies beyond horizon {}",
            profile.time, settings.horizon
        )));
    }
    Ok(())
}

/// Value of working `first` now and following `policy` afterwards.
pub fn value_with_first_action(
    inst: &ModelInstance,
    profile: &BeliefProfile,
    settings: &EvaluationSettings,
    first: usize,
    policy: &dyn PolicyRule,
) -> Result<PolicyValue> {
    check_time(profile, settings)?;
    let mut w = Walker::new(inst, settings);
    let value = w.value(profile, first, policy, 1.0)?;
    Ok(PolicyValue {
        value,
        pruned_mass: w.pruned_mass,
        nodes: w.nodes,
    })
}

/// `W^u_t` at the profile's slot: work `u`, then act myopically.
pub fn avf_evaluate(
    inst: &ModelInstance,
    profile: &BeliefProfile,
    settings: &EvaluationSettings,
    u: usize,
) -> Result<f64> {
    Ok(value_with_first_action(inst, profile, settings, u, &MyopicPolicy)?.value)
}

/// Exact expected discounted reward of `policy` from `profile` to the horizon.
pub fn policy_value(
    inst: &ModelInstance,
    profile: &BeliefProfile,
    settings: &EvaluationSettings,
    policy: &dyn PolicyRule,
) -> Result<PolicyValue> {
    let first = policy.action(inst, profile)?;
    value_with_first_action(inst, profile, settings, first, policy)
}

/// `W^u_t` of `profile` with the myopic continuation decided on `reference`
/// (the same profile before one belief was replaced). With a frozen plan the
/// value is linear in each project's belief.
pub fn avf_evaluate_with_plan(
    inst: &ModelInstance,
    profile: &BeliefProfile,
    reference: &BeliefProfile,
    settings: &EvaluationSettings,
    u: usize,
) -> Result<f64> {
    check_time(profile, settings)?;
    if reference.len() != profile.len() || reference.time != profile.time {
        return Err(Error::InvalidArgument("reference profile does not match".into()));
    }
    let mut w = Walker::new(inst, settings);
    w.planned_value(profile, Some(reference), u, &MyopicPolicy)
}

/// Smallest horizon `T` with `β^{T+1} max|R| / (1-β) < tol`, and that tail bound.
pub fn horizon_for_tolerance(beta: f64, max_abs_reward: f64, tol: f64) -> (usize, f64) {
    let scale = max_abs_reward / (1.0 - beta);
    let mut t = 0usize;
    let mut tail = beta * scale;
    while tail >= tol && t < 100_000 {
        t += 1;
        tail *= beta;
    }
    (t, tail)
}

/// All observation branches of working `u`: `(m, d, next profile)`.
pub fn expand(
    inst: &ModelInstance,
    profile: &BeliefProfile,
    u: usize,
    prune_epsilon: f64,
) -> Result<Vec<(usize, f64, BeliefProfile)>> {
    let x = &profile.beliefs[u];
    branches(inst, x, prune_epsilon)?
        .into_iter()
        .map(|(m, d, _)| Ok((m, d, step_profile(inst, profile, u, m)?)))
        .collect()
}
