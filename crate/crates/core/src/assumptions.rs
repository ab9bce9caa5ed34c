//! Structural conditions under which the myopic rule is optimal.
//!
//! Two mirrored families of five clauses each. Family 1 (increasing
//! dynamics):
//!
//! * 1.1 rows of `A` increase in MLR order,
//! * 1.2 columns of `B` are MLR-ordered (higher observations favour higher states),
//! * 1.3 some observation threshold `K` splits filter updates of the extreme
//!   rows around `(A')²e₁`,
//! * 1.4 initial beliefs form an MLR chain inside the band `[A₁, A_X]`,
//! * 1.5 reward gaps dominate their discounted-series counterparts.
//!
//! Family 2 reverses the row order of `A`, the threshold conditions and the
//! band. Every clause is always evaluated so reports are complete.

use std::fmt;

use serde::Serialize;

use crate::belief::{BeliefVector, ModelInstance, ObservationMatrix, TransitionMatrix};
use crate::error::Error;
use crate::filter::{condition_propagated, likelihood_of_propagated, propagate_n, MIN_LIKELIHOOD};
use crate::orders::{
    mlr_geq, obs_columns_mlr_ordered_with, rows_mlr_ordered_with, sort_by_mlr_with, Direction,
    ORDER_TOL,
};
use crate::spectral::{discount_matrices, eigendecompose, reward_separation_check};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Assumption1,
    Assumption2,
    Neither,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Assumption1 => "assumption1",
            Regime::Assumption2 => "assumption2",
            Regime::Neither => "neither",
        })
    }
}

/// Which reference belief the second threshold condition of clause 1.3
/// compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Clause3Variant {
    /// `T(A'e_X, K-1) <=_r (A')²e₁`.
    #[default]
    Literal,
    /// `T(A'e_X, K-1) <=_r (A')²e_X`.
    Alt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseResult {
    /// `"1.1"` .. `"2.5"`.
    pub id: String,
    pub passed: bool,
    /// Zero-based index pair locating the violation, when one exists.
    pub witness: Option<(usize, usize)>,
    pub detail: Option<String>,
}

impl ClauseResult {
    fn new(id: String, passed: bool, witness: Option<(usize, usize)>, detail: Option<String>) -> Self {
        Self {
            id,
            passed,
            witness,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub regime: Regime,
    pub clause_results: Vec<ClauseResult>,
    /// Zero-based observation threshold found for clause 3.
    pub k: Option<usize>,
}

impl AssumptionReport {
    pub fn clause(&self, id: &str) -> Option<&ClauseResult> {
        self.clause_results.iter().find(|c| c.id == id)
    }

    pub fn all_passed(&self) -> bool {
        self.clause_results.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ClauseResult> {
        self.clause_results.iter().find(|c| !c.passed)
    }
}

/// Family selector for the threshold scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    One,
    Two,
}

/// `T(A'x, m)` for a belief that has already been pushed through `A'`,
/// i.e. the filter applied to `A_i`. `None` when `m` has zero likelihood.
fn filter_of(a: &TransitionMatrix, b: &ObservationMatrix, x: &[f64], m: usize) -> Option<Vec<f64>> {
    let ax = a.transpose_apply(x);
    if likelihood_of_propagated(b, &ax, m) <= MIN_LIKELIHOOD {
        return None;
    }
    condition_propagated(b, &ax, m).ok().map(BeliefVector::into_inner)
}

/// Scans thresholds `K = 1..Y-1` (zero-based; the first observation can
/// never be a threshold) and returns the first one satisfying the clause-3
/// conditions of `family`. A candidate whose filter branch has zero
/// likelihood is disqualified.
pub fn find_threshold_k(
    a: &TransitionMatrix,
    b: &ObservationMatrix,
    family: Family,
    variant: Clause3Variant,
) -> Option<usize> {
    let x = a.n_states();
    let mut e1 = vec![0.0; x];
    e1[0] = 1.0;
    let mut ex = vec![0.0; x];
    ex[x - 1] = 1.0;
    let ae1 = a.transpose_apply(&e1);
    let aex = a.transpose_apply(&ex);
    let a2e1 = propagate_n(a, &e1, 2);
    let a2ex = propagate_n(a, &ex, 2);

    (1..b.n_obs()).find(|&k| match family {
        Family::One => {
            let reference = match variant {
                Clause3Variant::Literal => &a2e1,
                Clause3Variant::Alt => &a2ex,
            };
            match (filter_of(a, b, &ae1, k), filter_of(a, b, &aex, k - 1)) {
                (Some(up), Some(down)) => {
                    mlr_geq(&up, &a2e1, ORDER_TOL) && mlr_geq(reference, &down, ORDER_TOL)
                }
                _ => false,
            }
        }
        Family::Two => match (filter_of(a, b, &aex, k), filter_of(a, b, &ae1, k - 1)) {
            (Some(down), Some(up)) => {
                mlr_geq(&a2ex, &down, ORDER_TOL) && mlr_geq(&up, &a2ex, ORDER_TOL)
            }
            _ => false,
        },
    })
}

fn clause_id(family: Family, n: usize) -> String {
    match family {
        Family::One => format!("1.{n}"),
        Family::Two => format!("2.{n}"),
    }
}

/// Clause 4: after relabelling projects by MLR rank, the chain
/// `A₁ <=_r x_(1) <=_r ... <=_r x_(N) <=_r A_X` holds (reversed for family 2).
/// The witness is the failing adjacent pair in that chain, where position 0
/// is `A₁` and position `N+1` is `A_X`.
fn initial_band_clause(inst: &ModelInstance, family: Family) -> ClauseResult {
    let id = clause_id(family, 4);
    let x0 = inst.initial_beliefs();
    let order = match sort_by_mlr_with(x0, ORDER_TOL) {
        Ok(o) => o,
        Err(Error::IncomparablePair(l, n)) => {
            return ClauseResult::new(
                id,
                false,
                Some((l, n)),
                Some(format!("initial beliefs of projects {} and {} are incomparable", l + 1, n + 1)),
            )
        }
        Err(e) => return ClauseResult::new(id, false, None, Some(e.to_string())),
    };
    let a = inst.transition();
    let mut chain: Vec<&[f64]> = Vec::with_capacity(x0.len() + 2);
    chain.push(a.row(0));
    // `order` is greatest first; the chain runs from A₁'s side.
    match family {
        Family::One => chain.extend(order.iter().rev().map(|&i| x0[i].as_slice())),
        Family::Two => chain.extend(order.iter().map(|&i| x0[i].as_slice())),
    }
    chain.push(a.row(a.n_states() - 1));
    for (p, w) in chain.windows(2).enumerate() {
        let ok = match family {
            Family::One => mlr_geq(w[1], w[0], ORDER_TOL),
            Family::Two => mlr_geq(w[0], w[1], ORDER_TOL),
        };
        if !ok {
            return ClauseResult::new(
                id,
                false,
                Some((p, p + 1)),
                Some("initial beliefs leave the band spanned by the extreme rows of A".into()),
            );
        }
    }
    ClauseResult::new(id, true, None, None)
}

fn separation_clause(inst: &ModelInstance, family: Family) -> ClauseResult {
    let id = clause_id(family, 5);
    let checked = eigendecompose(inst.transition())
        .and_then(|dec| discount_matrices(&dec, inst.beta()))
        .and_then(|disc| reward_separation_check(inst.reward(), &disc.q));
    match checked {
        Ok(rep) => {
            let detail = (!rep.verdict.holds()).then(|| {
                let (i, _) = rep.verdict.witness.unwrap_or((0, 1));
                format!("separation margin {} at states {}-{}", rep.margins[i], i + 1, i + 2)
            });
            ClauseResult::new(id, rep.verdict.holds(), rep.verdict.witness, detail)
        }
        Err(e) => ClauseResult::new(id, false, None, Some(e.to_string())),
    }
}

fn verify_family(inst: &ModelInstance, family: Family, variant: Clause3Variant) -> AssumptionReport {
    let a = inst.transition();
    let b = inst.observation();
    let direction = match family {
        Family::One => Direction::Ascending,
        Family::Two => Direction::Descending,
    };
    let rows = rows_mlr_ordered_with(a, direction, ORDER_TOL);
    let cols = obs_columns_mlr_ordered_with(b, ORDER_TOL);
    let k = find_threshold_k(a, b, family, variant);
    let results = vec![
        ClauseResult::new(
            clause_id(family, 1),
            rows.holds(),
            rows.witness,
            (!rows.holds()).then(|| "rows of A are not MLR-ordered".to_string()),
        ),
        ClauseResult::new(
            clause_id(family, 2),
            cols.holds(),
            cols.witness,
            (!cols.holds()).then(|| "columns of B are not MLR-ordered".to_string()),
        ),
        ClauseResult::new(
            clause_id(family, 3),
            k.is_some(),
            None,
            k.is_none().then(|| "no observation threshold satisfies both conditions".to_string()),
        ),
        initial_band_clause(inst, family),
        separation_clause(inst, family),
    ];
    let regime = if results.iter().all(|c| c.passed) {
        match family {
            Family::One => Regime::Assumption1,
            Family::Two => Regime::Assumption2,
        }
    } else {
        Regime::Neither
    };
    AssumptionReport {
        regime,
        clause_results: results,
        k,
    }
}

pub fn verify_assumption1(inst: &ModelInstance, variant: Clause3Variant) -> AssumptionReport {
    verify_family(inst, Family::One, variant)
}

pub fn verify_assumption2(inst: &ModelInstance) -> AssumptionReport {
    verify_family(inst, Family::Two, Clause3Variant::Literal)
}

/// Both families' reports plus the first regime that holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub regime: Regime,
    pub assumption1: AssumptionReport,
    pub assumption2: AssumptionReport,
}

pub fn classify(inst: &ModelInstance, variant: Clause3Variant) -> Classification {
    let assumption1 = verify_assumption1(inst, variant);
    let assumption2 = verify_assumption2(inst);
    let regime = if assumption1.regime == Regime::Assumption1 {
        Regime::Assumption1
    } else {
        assumption2.regime
    };
    Classification {
        regime,
        assumption1,
        assumption2,
    }
}
