//! Sensitivity bounds on the auxiliary value when one project's belief is
//! raised in MLR order.
//!
//! Two profiles differ only in project `l`: `x_l <=_r x̌_l`, `δ = x̌_l - x_l`.
//! The measured quantity is `ΔW = W^{u'}_t(x̌) - W^u_t(x)`, with partial sums
//! `S(a..b) = Σ_{i=a..b} β^i R'(A')^i δ` and `h = T - t`.
//!
//! Increasing family (cases C1-C3):
//!
//! | case | actions            | lower  | upper      |
//! |------|--------------------|--------|------------|
//! | C1   | `u = u' = l`       | `R'δ`  | `S(0..h)`  |
//! | C2   | `u = u' ≠ l`       | `0`    | `S(1..h)`  |
//! | C3   | `u' = l`, `u ≠ l`  | `0`    | `S(0..h)`  |
//!
//! Reversed family (cases D1-D3) uses the odd powers `O = Σ_{i=1..⌈h/2⌉} (βA')^{2i-1}`
//! and even powers `E₂ = Σ_{i=1..⌊h/2⌋} (βA')^{2i}`:
//! D1 `[R'(I-O)δ, R'(I+E₂)δ]`, D2 `[-R'Oδ, R'E₂δ]`, D3 `[-R'Oδ, R'(I+E₂)δ]`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::assumptions::Regime;
use crate::belief::{BeliefVector, ModelInstance};
use crate::error::{Error, Result};
use crate::filter::BeliefProfile;
use crate::orders::{mlr_geq, ORDER_TOL};
use crate::policy::{avf_evaluate, EvaluationSettings};

/// Slack allowed on each side of a bound before a sample counts as a violation.
pub const BOUND_SLACK: f64 = 1e-9;

/// Largest `T - t` sampled by the suite.
pub const MAX_REMAINING_SLOTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseId {
    C1,
    C2,
    C3,
    D1,
    D2,
    D3,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// `(lower, upper)` for the three cases of one family, in case order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseBounds {
    pub cases: [(CaseId, f64, f64); 3],
}

impl CaseBounds {
    pub fn get(&self, case: CaseId) -> Option<(f64, f64)> {
        self.cases
            .iter()
            .find(|(c, _, _)| *c == case)
            .map(|(_, lo, hi)| (*lo, *hi))
    }
}

fn checked_delta(inst: &ModelInstance, lower: &BeliefVector, upper: &BeliefVector) -> Result<Vec<f64>> {
    if !mlr_geq(upper.as_slice(), lower.as_slice(), ORDER_TOL) {
        return Err(Error::OrderPrecondition(
            "the raised belief does not dominate the original in MLR order".into(),
        ));
    }
    let delta = upper.diff(lower)?;
    crate::belief::check_dim(inst.n_states(), delta.len())?;
    Ok(delta)
}

/// `terms[i] = β^i R'(A')^i δ` for `i = 0..=h`.
fn discounted_terms(inst: &ModelInstance, delta: &[f64], h: usize) -> Vec<f64> {
    let mut v = delta.to_vec();
    let mut out = Vec::with_capacity(h + 1);
    out.push(inst.reward().dot(&v));
    for _ in 0..h {
        v = inst.transition().transpose_apply(&v);
        v.iter_mut().for_each(|x| *x *= inst.beta());
        out.push(inst.reward().dot(&v));
    }
    out
}

/// Bounds of cases C1-C3 for `remaining = T - t` slots after the current one.
pub fn increasing_case_bounds(
    inst: &ModelInstance,
    remaining: usize,
    lower: &BeliefVector,
    upper: &BeliefVector,
) -> Result<CaseBounds> {
    let delta = checked_delta(inst, lower, upper)?;
    let terms = discounted_terms(inst, &delta, remaining);
    let all: f64 = terms.iter().sum();
    let future: f64 = terms[1..].iter().sum();
    Ok(CaseBounds {
        cases: [
            (CaseId::C1, terms[0], all),
            (CaseId::C2, 0.0, future),
            (CaseId::C3, 0.0, all),
        ],
    })
}

/// Bounds of cases D1-D3 for `remaining = T - t`.
pub fn reversed_case_bounds(
    inst: &ModelInstance,
    remaining: usize,
    lower: &BeliefVector,
    upper: &BeliefVector,
) -> Result<CaseBounds> {
    let delta = checked_delta(inst, lower, upper)?;
    let terms = discounted_terms(inst, &delta, remaining);
    let odd: f64 = terms.iter().skip(1).step_by(2).sum();
    let even: f64 = terms.iter().skip(2).step_by(2).sum();
    let now = terms[0];
    Ok(CaseBounds {
        cases: [
            (CaseId::D1, now - odd, now + even),
            (CaseId::D2, -odd, even),
            (CaseId::D3, -odd, now + even),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSample {
    pub case: CaseId,
    pub t: usize,
    pub horizon: usize,
    pub project: usize,
    pub lower_belief: Vec<f64>,
    pub upper_belief: Vec<f64>,
    /// Action on the profile holding the original belief.
    pub u: usize,
    /// Action on the profile holding the raised belief.
    pub u_prime: usize,
    pub delta_w: f64,
    pub lower: f64,
    pub upper: f64,
    pub slack_low: f64,
    pub slack_high: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsSuite {
    pub samples: Vec<BoundSample>,
    pub violations: usize,
    pub worst_slack: f64,
}

/// Random belief on the simplex (flat Dirichlet).
pub(crate) fn dirichlet<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// `base` tilted by `exp(theta * i)`; larger `theta` gives an MLR-larger belief.
pub(crate) fn tilt(base: &[f64], theta: f64) -> Vec<f64> {
    let w: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(i, p)| p * (theta * i as f64).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// An MLR-ascending chain of `len` beliefs: one random base belief tilted by
/// sorted random exponents.
pub fn sample_mlr_chain<R: Rng>(rng: &mut R, n_states: usize, len: usize) -> Result<Vec<BeliefVector>> {
    let base = dirichlet(rng, n_states);
    let mut thetas: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
    thetas.sort_by(f64::total_cmp);
    thetas
        .into_iter()
        .map(|th| BeliefVector::new(tilt(&base, th)))
        .collect()
}

pub(crate) fn sample_seed(seed: u64, i: u64) -> u64 {
    seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One sampled pair evaluated under all three cases of `regime`'s family.
///
/// Projects hold an MLR chain of `N + 1` beliefs. Project `l` holds
/// `chain[a]` in the original profile and `chain[b]` (`b >= a + 2`) in the
/// raised one; the project `n` that works instead of `l` in the third case
/// holds `chain[a + 1]`, so its belief lies between the two versions of
/// `l`'s belief.
fn sample_cases(inst: &ModelInstance, regime: Regime, seed: u64) -> Result<Vec<BoundSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.n_projects();
    let t = rng.random_range(1..=2usize);
    let remaining = rng.random_range(0..=MAX_REMAINING_SLOTS);
    let horizon = t + remaining;
    let settings = EvaluationSettings::new(inst, horizon);
    let l = rng.random_range(0..n);

    let (x_l, x_check, others, between) = if n == 1 {
        let chain = sample_mlr_chain(&mut rng, inst.n_states(), 2)?;
        (chain[0].clone(), chain[1].clone(), Vec::new(), None)
    } else {
        let chain = sample_mlr_chain(&mut rng, inst.n_states(), n + 1)?;
        let a = rng.random_range(0..=(n - 2));
        let b = rng.random_range((a + 2)..=n);
        let mut rest: Vec<usize> = (0..=n).filter(|&i| i != a && i != b).collect();
        rest.shuffle(&mut rng);
        let others: Vec<BeliefVector> = rest.iter().map(|&i| chain[i].clone()).collect();
        let between = rest.iter().position(|&i| i == a + 1);
        (chain[a].clone(), chain[b].clone(), others, between)
    };

    // Slot the other beliefs into the non-`l` positions in order.
    let mut slots: Vec<usize> = (0..n).filter(|&p| p != l).collect();
    let mut base = vec![BeliefVector::uniform(inst.n_states()); n];
    for (p, x) in slots.iter().zip(others) {
        base[*p] = x;
    }
    let n_between = between.map(|i| slots[i]);
    let profile = BeliefProfile::new(base, t);
    let original = profile.with_belief(l, x_l.clone());
    let raised = profile.with_belief(l, x_check.clone());

    let bounds = match regime {
        Regime::Assumption1 => increasing_case_bounds(inst, remaining, &x_l, &x_check)?,
        Regime::Assumption2 => reversed_case_bounds(inst, remaining, &x_l, &x_check)?,
        Regime::Neither => {
            return Err(Error::InvalidArgument(
                "bound checks require a verified regime".into(),
            ))
        }
    };

    let other = if n > 1 {
        slots.shuffle(&mut rng);
        Some(slots[0])
    } else {
        None
    };

    let mut out = Vec::with_capacity(3);
    for (case, lo, hi) in bounds.cases {
        let actions = match case {
            CaseId::C1 | CaseId::D1 => Some((l, l)),
            CaseId::C2 | CaseId::D2 => other.map(|k| (k, k)),
            CaseId::C3 | CaseId::D3 => n_between.map(|k| (k, l)),
        };
        let Some((u, u_prime)) = actions else { continue };
        let delta_w = avf_evaluate(inst, &raised, &settings, u_prime)?
            - avf_evaluate(inst, &original, &settings, u)?;
        let slack_low = delta_w - lo;
        let slack_high = hi - delta_w;
        out.push(BoundSample {
            case,
            t,
            horizon,
            project: l,
            lower_belief: x_l.as_slice().to_vec(),
            upper_belief: x_check.as_slice().to_vec(),
            u,
            u_prime,
            delta_w,
            lower: lo,
            upper: hi,
            slack_low,
            slack_high,
            passed: slack_low >= -BOUND_SLACK && slack_high >= -BOUND_SLACK,
        });
    }
    Ok(out)
}

/// Samples `n_samples` belief pairs, checks every applicable case on each and
/// aggregates. Sample `i` draws from its own stream, so the table does not
/// depend on `parallel`.
pub fn check_bounds_suite(
    inst: &ModelInstance,
    regime: Regime,
    n_samples: usize,
    seed: u64,
    parallel: bool,
) -> Result<BoundsSuite> {
    let run = |i: usize| sample_cases(inst, regime, sample_seed(seed, i as u64));
    let nested: Vec<Vec<BoundSample>> = if parallel {
        (0..n_samples).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..n_samples).map(run).collect::<Result<_>>()?
    };
    let samples: Vec<BoundSample> = nested.into_iter().flatten().collect();
    let violations = samples.iter().filter(|s| !s.passed).count();
    let worst_slack = samples
        .iter()
        .map(|s| s.slack_low.min(s.slack_high))
        .fold(f64::INFINITY, f64::min);
    Ok(BoundsSuite {
        samples,
        violations,
        worst_slack,
    })
}
