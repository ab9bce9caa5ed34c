//! Random instances that satisfy (or deliberately violate) the structural
//! conditions of [`crate::assumptions`].
//!
//! Increasing family: rows of `A` are ordered mixtures `(1-w_i) p + w_i q`
//! of two anchors with `q >=_r p` and sorted weights, which makes the rows
//! MLR-ascending by construction; `B` is built the same way over
//! observations. Threshold and separation clauses are then met by rejection.
//!
//! Reversed family: descending rows together with the threshold conditions
//! and MLR-ordered columns of `B` pin `T(A'e₁, K-1) <=_r T(A'e_X, K) <=_r
//! (A')²e_X <=_r T(A'e₁, K-1)`, so every term coincides. For the dimensions
//! handled here that forces identical rows of `A` and an uninformative `B`;
//! the band of admissible initial beliefs then collapses to the common row.
//! The generator emits exactly that family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assumptions::{verify_assumption1, verify_assumption2, AssumptionReport, Clause3Variant, Regime};
use crate::belief::{BeliefVector, ModelInstance, ObservationMatrix, RewardVector, TransitionMatrix};
use crate::bounds::{dirichlet, tilt};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorParams {
    /// Inclusive ranges `(min, max)`.
    pub n_states: (usize, usize),
    pub n_obs: (usize, usize),
    pub n_projects: (usize, usize),
    /// Inclusive range of the discount factor.
    pub beta: (f64, f64),
    pub max_attempts: usize,
    pub clause3: Clause3Variant,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_states: (2, 3),
            n_obs: (2, 3),
            n_projects: (2, 3),
            beta: (0.3, 0.6),
            max_attempts: 10_000,
            clause3: Clause3Variant::Literal,
        }
    }
}

impl GeneratorParams {
    /// Fixed dimensions and discount.
    pub fn fixed(n_states: usize, n_obs: usize, n_projects: usize, beta: f64) -> Self {
        Self {
            n_states: (n_states, n_states),
            n_obs: (n_obs, n_obs),
            n_projects: (n_projects, n_projects),
            beta: (beta, beta),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("n_states", self.n_states),
            ("n_obs", self.n_obs),
            ("n_projects", self.n_projects),
        ];
        for (name, (lo, hi)) in ranges {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidArgument(format!("{name} range [{lo}, {hi}] is invalid")));
            }
        }
        let (lo, hi) = self.beta;
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidArgument(format!("beta range [{lo}, {hi}] is invalid")));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidArgument("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

struct Dims {
    x: usize,
    y: usize,
    n: usize,
    beta: f64,
}

fn sample_dims<R: Rng>(rng: &mut R, p: &GeneratorParams) -> Dims {
    let beta = if p.beta.0 == p.beta.1 {
        p.beta.0
    } else {
        rng.random_range(p.beta.0..=p.beta.1)
    };
    Dims {
        x: rng.random_range(p.n_states.0..=p.n_states.1),
        y: rng.random_range(p.n_obs.0..=p.n_obs.1),
        n: rng.random_range(p.n_projects.0..=p.n_projects.1),
        beta,
    }
}

/// Two anchor distributions `(p, q)` with `q >=_r p`.
fn anchor_pair<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    let p = dirichlet(rng, n);
    let scale = rng.random_range(0.0..3.0);
    let mut gaps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    gaps.sort_by(f64::total_cmp);
    let w: Vec<f64> = p.iter().zip(&gaps).map(|(x, g)| x * (scale * g).exp()).collect();
    let s: f64 = w.iter().sum();
    (p, w.into_iter().map(|x| x / s).collect())
}

/// `rows` rows, each a mixture of the anchors with sorted weights.
fn ordered_mixture_rows<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let (p, q) = anchor_pair(rng, cols);
    let mut w: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..1.0)).collect();
    w.sort_by(f64::total_cmp);
    w.iter()
        .map(|wi| p.iter().zip(&q).map(|(a, b)| (1.0 - wi) * a + wi * b).collect())
        .collect()
}

fn increasing_rewards<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|_| {
            acc += rng.random_range(0.1..1.0);
            acc
        })
        .collect()
}

fn build(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    r: Vec<f64>,
    beta: f64,
    x0: Vec<Vec<f64>>,
) -> Result<ModelInstance> {
    ModelInstance::new(
        TransitionMatrix::new(a)?,
        ObservationMatrix::new(b)?,
        RewardVector::new(r)?,
        beta,
        x0.into_iter().map(BeliefVector::new).collect::<Result<_>>()?,
    )
}

fn exhausted(attempts: usize, report: Option<&AssumptionReport>) -> Error {
    Error::GenerationExhausted {
        attempts,
        last_failing_clause: report
            .and_then(|r| r.first_failure())
            .map(|c| c.id.clone())
            .unwrap_or_else(|| "none".into()),
    }
}

/// Random instance satisfying every clause of the increasing family.
pub fn gen_assumption1_instance(params: &GeneratorParams, seed: u64) -> Result<ModelInstance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = sample_dims(&mut rng, params);
    let mut last = None;
    for _ in 0..params.max_attempts {
        let a = ordered_mixture_rows(&mut rng, d.x, d.x);
        let b = ordered_mixture_rows(&mut rng, d.x, d.y);
        let r = increasing_rewards(&mut rng, d.x);
        let mut s: Vec<f64> = (0..d.n).map(|_| rng.random_range(0.0..1.0)).collect();
        s.sort_by(f64::total_cmp);
        let (lo, hi) = (a[0].clone(), a[d.x - 1].clone());
        let x0 = s
            .iter()
            .map(|si| lo.iter().zip(&hi).map(|(p, q)| (1.0 - si) * p + si * q).collect())
            .collect();
        let inst = build(a, b, r, d.beta, x0)?;
        let report = verify_assumption1(&inst, params.clause3);
        if report.regime == Regime::Assumption1 {
            return Ok(inst);
        }
        last = Some(report);
    }
    Err(exhausted(params.max_attempts, last.as_ref()))
}

/// Random instance satisfying every clause of the reversed family: identical
/// rows of `A`, uninformative `B`, initial beliefs equal to the common row.
pub fn gen_assumption2_instance(params: &GeneratorParams, seed: u64) -> Result<ModelInstance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = sample_dims(&mut rng, params);
    let mut last = None;
    for _ in 0..params.max_attempts {
        let row = dirichlet(&mut rng, d.x);
        let obs = dirichlet(&mut rng, d.y);
        let r = increasing_rewards(&mut rng, d.x);
        let inst = build(vec![row.clone(); d.x], vec![obs; d.x], r, d.beta, vec![row; d.n])?;
        let report = verify_assumption2(&inst);
        if report.regime == Regime::Assumption2 {
            return Ok(inst);
        }
        last = Some(report);
    }
    Err(exhausted(params.max_attempts, last.as_ref()))
}

/// Instance with no structure beyond well-formedness: Dirichlet rows,
/// increasing rewards, Dirichlet initial beliefs.
pub fn gen_unconstrained_instance(params: &GeneratorParams, seed: u64) -> Result<ModelInstance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = sample_dims(&mut rng, params);
    let a = (0..d.x).map(|_| dirichlet(&mut rng, d.x)).collect();
    let b = (0..d.x).map(|_| dirichlet(&mut rng, d.y)).collect();
    let r = increasing_rewards(&mut rng, d.x);
    let x0 = (0..d.n).map(|_| dirichlet(&mut rng, d.x)).collect();
    build(a, b, r, d.beta, x0)
}

fn family_report(inst: &ModelInstance, family: u8, variant: Clause3Variant) -> AssumptionReport {
    if family == 1 {
        verify_assumption1(inst, variant)
    } else {
        verify_assumption2(inst)
    }
}

/// Rows tilted monotonically from `base`: ascending in MLR order for
/// `sign > 0`, descending for `sign < 0`.
fn tilted_rows(base: &[f64], rows: usize, sign: f64) -> Vec<Vec<f64>> {
    (0..rows).map(|i| tilt(base, sign * 1.5 * i as f64)).collect()
}

/// Candidate perturbations of `inst` aimed at one clause, least invasive first.
fn candidates(inst: &ModelInstance, family: u8, clause: u8, seed: u64) -> Result<Vec<ModelInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = inst.n_states();
    let y = inst.n_obs();
    let a_rows = inst.transition().to_rows();
    let b_rows = inst.observation().to_rows();
    // Direction that breaks the family's row order.
    let wrong = if family == 1 { -1.0 } else { 1.0 };
    let mut out = Vec::new();
    match clause {
        1 => {
            let mut swapped = a_rows.clone();
            swapped.swap(0, x - 1);
            out.push(inst.with_transition(TransitionMatrix::new(swapped)?)?);
            let base = dirichlet(&mut rng, x);
            out.push(inst.with_transition(TransitionMatrix::new(tilted_rows(&base, x, wrong))?)?);
        }
        2 => {
            let reversed: Vec<Vec<f64>> = b_rows
                .iter()
                .map(|r| r.iter().rev().cloned().collect())
                .collect();
            out.push(inst.with_observation(ObservationMatrix::new(reversed)?)?);
            let base = dirichlet(&mut rng, y);
            out.push(inst.with_observation(ObservationMatrix::new(tilted_rows(&base, x, -1.0))?)?);
        }
        3 => {
            let flat = vec![vec![1.0 / y as f64; y]; x];
            out.push(inst.with_observation(ObservationMatrix::new(flat)?)?);
            let reversed: Vec<Vec<f64>> = b_rows
                .iter()
                .map(|r| r.iter().rev().cloned().collect())
                .collect();
            out.push(inst.with_observation(ObservationMatrix::new(reversed)?)?);
            let base = vec![1.0 / y as f64; y];
            out.push(inst.with_observation(ObservationMatrix::new(tilted_rows(&base, x, 1.0))?)?);
            out.push(inst.with_observation(ObservationMatrix::new(tilted_rows(&base, x, -1.0))?)?);
        }
        4 => {
            for state in [0, x - 1] {
                let mut x0 = inst.initial_beliefs().to_vec();
                x0[0] = BeliefVector::basis(state, x)?;
                out.push(inst.with_initial_beliefs(x0)?);
            }
        }
        5 => {
            // Uneven reward gaps, then heavier discounting, then slower mixing.
            let r = inst.reward().as_slice();
            let uneven: Vec<f64> = (0..x).map(|i| r[0] + (i as f64).powi(3) + 1e-3 * i as f64).collect();
            out.push(inst.with_reward(RewardVector::new(uneven)?)?);
            let heavy = inst.with_beta(0.99)?;
            out.push(heavy.clone());
            // Slow mixing that keeps the rows an MLR chain: a tilted family
            // whose outer rows approach the extreme basis beliefs.
            let flat = vec![1.0 / x as f64; x];
            let centre = (x - 1) as f64 / 2.0;
            for spread in [1.0, 2.0, 4.0, 8.0] {
                let rows: Vec<Vec<f64>> = (0..x).map(|i| tilt(&flat, spread * (i as f64 - centre))).collect();
                out.push(heavy.with_transition(TransitionMatrix::new(rows)?)?);
            }
            for w in [0.5, 0.9, 0.99] {
                let mixed: Vec<Vec<f64>> = a_rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, a)| (1.0 - w) * a + if i == j { w } else { 0.0 })
                            .collect()
                    })
                    .collect();
                out.push(heavy.with_transition(TransitionMatrix::new(mixed)?)?);
            }
        }
        _ => unreachable!("clause index checked by caller"),
    }
    Ok(out)
}

fn parse_clause(id: &str) -> Result<(u8, u8)> {
    let bad = || Error::InvalidArgument(format!("unknown clause '{id}' (expected 1.1-1.5 or 2.1-2.5)"));
    let (f, c) = id.split_once('.').ok_or_else(bad)?;
    let f: u8 = f.parse().map_err(|_| bad())?;
    let c: u8 = c.parse().map_err(|_| bad())?;
    if !(1..=2).contains(&f) || !(1..=5).contains(&c) {
        return Err(bad());
    }
    Ok((f, c))
}

/// Perturbs `inst` until clause `clause` (e.g. `"1.5"`) fails while the
/// instance stays well-formed. A candidate that breaks only the targeted
/// clause is preferred; otherwise other clauses may fail as a side effect.
pub fn perturb_violate(
    inst: &ModelInstance,
    clause: &str,
    seed: u64,
    variant: Clause3Variant,
) -> Result<ModelInstance> {
    let (family, index) = parse_clause(clause)?;
    let fails = |i: &ModelInstance| {
        family_report(i, family, variant)
            .clause(clause)
            .is_some_and(|c| !c.passed)
    };
    if fails(inst) {
        return Ok(inst.clone());
    }
    let cands = candidates(inst, family, index, seed)?;
    let only_target = |i: &ModelInstance| {
        family_report(i, family, variant)
            .clause_results
            .iter()
            .all(|c| c.passed != (c.id == clause))
    };
    if let Some(c) = cands.iter().find(|c| only_target(c)) {
        return Ok(c.clone());
    }
    if let Some(c) = cands.into_iter().find(|c| fails(c)) {
        return Ok(c);
    }
    Err(Error::CannotViolate {
        clause: clause.to_string(),
        reason: format!(
            "no perturbation breaks it at X={}, Y={}, N={}",
            inst.n_states(),
            inst.n_obs(),
            inst.n_projects()
        ),
    })
}
