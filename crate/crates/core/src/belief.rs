//! Core domain types: beliefs on the probability simplex, the shared
//! transition/observation model, rewards and problem instances.
//!
//! Every type here is validated at construction and immutable afterwards,
//! so values can be shared freely across worker threads.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest simplex-sum drift that construction silently renormalizes away.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Negative entries down to this magnitude are treated as rounding noise.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-12;

/// Decimal digits kept when beliefs are used as memo keys.
pub const MEMO_DIGITS: i32 = 12;

/// A probability vector over the hidden states of one project.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BeliefVector {
    probs: Vec<f64>,
}

impl BeliefVector {
    /// Validates `probs`, clamps rounding-level negatives to zero and
    /// renormalizes when the sum drifts by at most [`RENORMALIZE_TOL`].
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty vector".into()));
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidBelief(format!("entry {i} is not finite")));
            }
            if *p < 0.0 {
                if *p < -NEGATIVE_CLAMP_TOL {
                    return Err(Error::InvalidBelief(format!("entry {i} is negative ({p:e})")));
                }
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}, not 1")));
        }
        // Sums already within rounding of 1 are kept as is, so
        // construction is idempotent and serialized values round-trip.
        if (sum - 1.0).abs() > probs.len() as f64 * f64::EPSILON {
            for p in probs.iter_mut() {
                *p /= sum;
            }
        }
        Ok(Self { probs })
    }

    /// The basis belief concentrated on `state` (zero-based).
    pub fn basis(state: usize, n_states: usize) -> Result<Self> {
        if state >= n_states {
            return Err(Error::IndexOutOfRange {
                index: state,
                len: n_states,
            });
        }
        let mut probs = vec![0.0; n_states];
        probs[state] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize) -> Self {
        Self {
            probs: vec![1.0 / n_states as f64; n_states],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    /// Entry-wise difference `self - other`.
    pub fn diff(&self, other: &BeliefVector) -> Result<Vec<f64>> {
        check_dim(self.len(), other.len())?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| a - b)
            .collect())
    }

    /// Convex combination `(1 - w) * self + w * other`.
    pub fn mix(&self, other: &BeliefVector, w: f64) -> Result<BeliefVector> {
        check_dim(self.len(), other.len())?;
        BeliefVector::new(
            self.probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect(),
        )
    }

    pub(crate) fn push_memo_key(&self, key: &mut Vec<i64>) {
        let scale = 10f64.powi(MEMO_DIGITS);
        key.extend(self.probs.iter().map(|p| (p * scale).round() as i64));
    }
}

impl AsRef<[f64]> for BeliefVector {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

impl std::ops::Index<usize> for BeliefVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

impl<'de> Deserialize<'de> for BeliefVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(d)?;
        BeliefVector::new(probs).map_err(serde::de::Error::custom)
    }
}

/// `e_i` as a belief vector (zero-based `state`).
pub fn basis_belief(state: usize, n_states: usize) -> Result<BeliefVector> {
    BeliefVector::basis(state, n_states)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Row-stochastic transition matrix; row `i` is the next-state law from state `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("transition matrix has no rows".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            check_dim(n, row.len())?;
            data.extend(BeliefVector::new(row)?.into_inner());
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Row `i` as a belief vector (`A_i`).
    pub fn row_belief(&self, i: usize) -> BeliefVector {
        BeliefVector {
            probs: self.row(i).to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// `A'v` for an arbitrary vector (beliefs or belief differences).
    pub fn transpose_apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        let mut out = vec![0.0; self.n];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Observation law: row `i` is the distribution of the observation when the
/// worked project lands in state `i`. Column `m` gives the diagonal of `B(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    n_states: usize,
    n_obs: usize,
    data: Vec<f64>,
}

impl ObservationMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        if n_states == 0 {
            return Err(Error::InvalidArgument("observation matrix has no rows".into()));
        }
        let n_obs = rows[0].len();
        let mut data = Vec::with_capacity(n_states * n_obs);
        for row in rows {
            check_dim(n_obs, row.len())?;
            data.extend(BeliefVector::new(row)?.into_inner());
        }
        Ok(Self {
            n_states,
            n_obs,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            n_states: n,
            n_obs: n,
            data,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    #[inline]
    pub fn get(&self, state: usize, obs: usize) -> f64 {
        self.data[state * self.n_obs + obs]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_obs..(i + 1) * self.n_obs]
    }

    pub fn column(&self, obs: usize) -> Vec<f64> {
        (0..self.n_states).map(|i| self.get(i, obs)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Per-state reward, strictly increasing in the state index.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RewardVector {
    values: Vec<f64>,
}

impl RewardVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("reward vector is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("reward {i} is not finite")));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "rewards not strictly increasing at state {}",
                i + 1
            )));
        }
        Ok(Self { values })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `R'v` for any vector of matching length.
    #[inline]
    pub fn dot(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.values.len());
        self.values.iter().zip(v).map(|(r, x)| r * x).sum()
    }
}

/// `R'x`, the expected one-step reward of working a project with belief `x`.
pub fn expected_reward(r: &RewardVector, x: &BeliefVector) -> Result<f64> {
    check_dim(r.len(), x.len())?;
    Ok(r.dot(x.as_slice()))
}

/// Serialized form of an instance; the canonical input of every CLI command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub n_projects: usize,
    pub n_states: usize,
    pub n_obs: usize,
    pub beta: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    pub x0: Vec<Vec<f64>>,
}

/// Every structural defect found in an [`InstanceDoc`]; empty iff well-formed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.issues.join("; "))
    }
}

fn check_stochastic_rows(
    name: &str,
    rows: &[Vec<f64>],
    n_rows: usize,
    n_cols: usize,
    issues: &mut Vec<String>,
) {
    if rows.len() != n_rows {
        issues.push(format!("{name}: expected {n_rows} rows, found {}", rows.len()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n_cols {
            issues.push(format!(
                "{name}: row {} has {} entries, expected {n_cols}",
                i + 1,
                row.len()
            ));
            continue;
        }
        if row.iter().any(|v| !v.is_finite() || *v < -NEGATIVE_CLAMP_TOL) {
            issues.push(format!("{name}: row {} has negative or non-finite entries", i + 1));
            continue;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            issues.push(format!("{name}: row {} not stochastic (sum {sum})", i + 1));
        }
    }
}

/// Lists every violated structural invariant of `doc`.
pub fn validate_instance(doc: &InstanceDoc) -> ValidationReport {
    let mut issues = Vec::new();
    if doc.n_projects == 0 {
        issues.push("n_projects must be positive".to_string());
    }
    if doc.n_states == 0 {
        issues.push("n_states must be positive".to_string());
    }
    if doc.n_obs == 0 {
        issues.push("n_obs must be positive".to_string());
    }
    if !(doc.beta.is_finite() && (0.0..1.0).contains(&doc.beta)) {
        issues.push(format!("beta out of range [0, 1): {}", doc.beta));
    }
    check_stochastic_rows("A", &doc.a, doc.n_states, doc.n_states, &mut issues);
    check_stochastic_rows("B", &doc.b, doc.n_states, doc.n_obs, &mut issues);
    if doc.r.len() != doc.n_states {
        issues.push(format!(
            "R: expected {} entries, found {}",
            doc.n_states,
            doc.r.len()
        ));
    } else if doc.r.iter().any(|v| !v.is_finite()) {
        issues.push("R: non-finite reward".to_string());
    } else if let Some(i) = doc.r.windows(2).position(|w| w[1] <= w[0]) {
        issues.push(format!("R: not strictly increasing at state {}", i + 2));
    }
    if doc.x0.len() != doc.n_projects {
        issues.push(format!(
            "x0: expected {} beliefs, found {}",
            doc.n_projects,
            doc.x0.len()
        ));
    }
    for (n, x) in doc.x0.iter().enumerate() {
        if x.len() != doc.n_states {
            issues.push(format!("x0: belief {} has {} entries", n + 1, x.len()));
        } else if let Err(e) = BeliefVector::new(x.clone()) {
            issues.push(format!("x0: belief {}: {e}", n + 1));
        }
    }
    ValidationReport { issues }
}

/// A complete, validated problem: `N` projects sharing one `(A, B, R)` model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInstance {
    a: TransitionMatrix,
    b: ObservationMatrix,
    r: RewardVector,
    beta: f64,
    initial_beliefs: Vec<BeliefVector>,
}

impl ModelInstance {
    pub fn new(
        a: TransitionMatrix,
        b: ObservationMatrix,
        r: RewardVector,
        beta: f64,
        initial_beliefs: Vec<BeliefVector>,
    ) -> Result<Self> {
        let x = a.n_states();
        check_dim(x, b.n_states())?;
        check_dim(x, r.len())?;
        if initial_beliefs.is_empty() {
            return Err(Error::InvalidArgument("at least one project is required".into()));
        }
        for belief in &initial_beliefs {
            check_dim(x, belief.len())?;
        }
        if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
            return Err(Error::InvalidArgument(format!("beta out of range [0, 1): {beta}")));
        }
        Ok(Self {
            a,
            b,
            r,
            beta,
            initial_beliefs,
        })
    }

    pub fn from_doc(doc: &InstanceDoc) -> Result<Self> {
        let report = validate_instance(doc);
        if !report.is_ok() {
            return Err(Error::InvalidInstance(report));
        }
        Self::new(
            TransitionMatrix::new(doc.a.clone())?,
            ObservationMatrix::new(doc.b.clone())?,
            RewardVector::new(doc.r.clone())?,
            doc.beta,
            doc.x0
                .iter()
                .map(|x| BeliefVector::new(x.clone()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            n_projects: self.n_projects(),
            n_states: self.n_states(),
            n_obs: self.n_obs(),
            beta: self.beta,
            a: self.a.to_rows(),
            b: self.b.to_rows(),
            r: self.r.as_slice().to_vec(),
            x0: self
                .initial_beliefs
                .iter()
                .map(|x| x.as_slice().to_vec())
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn n_projects(&self) -> usize {
        self.initial_beliefs.len()
    }

    pub fn n_states(&self) -> usize {
        self.a.n_states()
    }

    pub fn n_obs(&self) -> usize {
        self.b.n_obs()
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.a
    }

    pub fn observation(&self) -> &ObservationMatrix {
        &self.b
    }

    pub fn reward(&self) -> &RewardVector {
        &self.r
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn initial_beliefs(&self) -> &[BeliefVector] {
        &self.initial_beliefs
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.r.clone(),
            beta,
            self.initial_beliefs.clone(),
        )
    }

    pub fn with_transition(&self, a: TransitionMatrix) -> Result<Self> {
        Self::new(a, self.b.clone(), self.r.clone(), self.beta, self.initial_beliefs.clone())
    }

    pub fn with_observation(&self, b: ObservationMatrix) -> Result<Self> {
        Self::new(self.a.clone(), b, self.r.clone(), self.beta, self.initial_beliefs.clone())
    }

    pub fn with_reward(&self, r: RewardVector) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), r, self.beta, self.initial_beliefs.clone())
    }

    pub fn with_initial_beliefs(&self, x0: Vec<BeliefVector>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.r.clone(), self.beta, x0)
    }
}
