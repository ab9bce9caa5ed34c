//! Exact finite-horizon dynamic program over the reachable belief tree.
//!
//! ```text
//! V_T(x)  = max_u R'x_u
//! V_t(x)  = max_u [ R'x_u + β Σ_m d(x_u, m) V_{t+1}(profile after (u, m)) ]
//! ```
//!
//! Nodes are memoized on the slot and the profile rounded to 12 decimals;
//! passive projects evolve deterministically, so subtrees coincide often.

use std::collections::HashMap;

use serde::Serialize;

use crate::belief::ModelInstance;
use crate::error::{Error, Result};
use crate::filter::BeliefProfile;
use crate::policy::{
    expand, policy_value, EvaluationSettings, MyopicPolicy, PolicyRule, DEFAULT_NODE_BUDGET, TIE_TOL,
};

/// Tolerance for the myopic action to count as attaining the DP maximum.
pub const AGREEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueReport {
    pub optimal_value: f64,
    pub myopic_value: f64,
    pub gap: f64,
    /// Distinct nodes expanded at each slot `0..=T`.
    pub per_depth_node_counts: Vec<usize>,
    /// Fraction of expanded nodes where the myopic action attains the maximum.
    pub argmax_agreement: f64,
    pub optimal_first_action: usize,
}

type MemoKey = (usize, Vec<i64>);

pub struct DpSolver<'a> {
    inst: &'a ModelInstance,
    settings: EvaluationSettings,
    memo: Option<HashMap<MemoKey, (f64, usize)>>,
    nodes: usize,
    per_depth: Vec<usize>,
    agreeing: usize,
}

impl<'a> DpSolver<'a> {
    pub fn new(inst: &'a ModelInstance, horizon: usize) -> Self {
        Self::with_settings(inst, EvaluationSettings::new(inst, horizon), true)
    }

    pub fn with_settings(inst: &'a ModelInstance, settings: EvaluationSettings, memoize: bool) -> Self {
        Self {
            inst,
            settings,
            memo: memoize.then(HashMap::new),
            nodes: 0,
            per_depth: vec![0; settings.horizon + 1],
            agreeing: 0,
        }
    }

    pub fn with_node_budget(mut self, budget: usize) -> Self {
        self.settings.node_budget = budget;
        self
    }

    pub fn settings(&self) -> &EvaluationSettings {
        &self.settings
    }

    /// Distinct nodes expanded so far.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn per_depth_node_counts(&self) -> &[usize] {
        &self.per_depth
    }

    pub fn argmax_agreement(&self) -> f64 {
        if self.nodes == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.nodes as f64
        }
    }

    /// One-step lookahead values `Q(u)` for every project, using `V_{t+1}`.
    pub fn q_values(&mut self, profile: &BeliefProfile) -> Result<Vec<f64>> {
        let r = self.inst.reward();
        let mut q = Vec::with_capacity(profile.len());
        for u in 0..profile.len() {
            let mut value = r.dot(profile.beliefs[u].as_slice());
            if profile.time < self.settings.horizon && self.settings.beta != 0.0 {
                let mut future = 0.0;
                for (_, d, next) in expand(self.inst, profile, u, self.settings.prune_epsilon)? {
                    future += d * self.optimal_value(&next)?.0;
                }
                value += self.settings.beta * future;
            }
            q.push(value);
        }
        Ok(q)
    }

    /// `(V_t, best action)` at the profile's slot; the best action is the
    /// lowest index within 1e-12 of the maximum.
    pub fn optimal_value(&mut self, profile: &BeliefProfile) -> Result<(f64, usize)> {
        if profile.time > self.settings.horizon {
            return Err(Error::InvalidArgument(format!(
                "slot {} lies beyond horizon {}",
                profile.time, self.settings.horizon
            )));
        }
        let key = self.memo.as_ref().map(|_| (profile.time, profile.memo_key()));
        if let (Some(memo), Some(k)) = (&self.memo, &key) {
            if let Some(hit) = memo.get(k) {
                return Ok(*hit);
            }
        }
        self.nodes += 1;
        if self.nodes > self.settings.node_budget {
            return Err(Error::NodeBudgetExceeded {
                budget: self.settings.node_budget,
                n_projects: self.inst.n_projects(),
                n_obs: self.inst.n_obs(),
                horizon: self.settings.horizon,
            });
        }
        self.per_depth[profile.time] += 1;

        let q = self.q_values(profile)?;
        let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let action = q.iter().position(|v| *v >= best - TIE_TOL).unwrap_or(0);
        let myopic = MyopicPolicy.action(self.inst, profile)?;
        if q[myopic] >= best - AGREEMENT_TOL {
            self.agreeing += 1;
        }

        if let (Some(memo), Some(k)) = (&mut self.memo, key) {
            memo.insert(k, (best, action));
        }
        Ok((best, action))
    }
}

/// `(V_t, best action)` with a fresh memoized solver.
pub fn optimal_value(inst: &ModelInstance, profile: &BeliefProfile, horizon: usize) -> Result<(f64, usize)> {
    DpSolver::new(inst, horizon).optimal_value(profile)
}

/// Solves the DP from the initial profile and compares with the myopic rule.
pub fn certify_myopic(inst: &ModelInstance, horizon: usize) -> Result<ValueReport> {
    certify_myopic_with(inst, horizon, DEFAULT_NODE_BUDGET)
}

pub fn certify_myopic_with(inst: &ModelInstance, horizon: usize, node_budget: usize) -> Result<ValueReport> {
    let profile = BeliefProfile::initial(inst);
    let mut solver = DpSolver::new(inst, horizon).with_node_budget(node_budget);
    let (optimal_value, optimal_first_action) = solver.optimal_value(&profile)?;
    let myopic_value = policy_value(inst, &profile, solver.settings(), &MyopicPolicy)?.value;
    Ok(ValueReport {
        optimal_value,
        myopic_value,
        gap: optimal_value - myopic_value,
        per_depth_node_counts: solver.per_depth_node_counts().to_vec(),
        argmax_agreement: solver.argmax_agreement(),
        optimal_first_action,
    })
}
