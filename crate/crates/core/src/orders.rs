//! Stochastic orders on probability vectors.
//!
//! * MLR (monotone likelihood ratio): `x1 >=_r x2` iff
//!   `x2(i) * x1(j) <= x1(i) * x2(j)` for every `i > j`. The cross-product
//!   form never divides, so zero entries are handled without special cases.
//! * FOSD (first-order stochastic dominance): `x1 >=_s x2` iff every upper
//!   tail sum of `x1` dominates the corresponding tail sum of `x2`.
//!
//! All predicates accept an explicit tolerance; the plain variants use
//! [`ORDER_TOL`]. Indices in witnesses are zero-based.

use serde::Serialize;

use crate::belief::{check_dim, ObservationMatrix, TransitionMatrix};
use crate::error::{Error, Result};

/// Default slack on every order predicate; absorbs filter rounding noise.
pub const ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    LessOrEqual,
    GreaterOrEqual,
    Equal,
    Incomparable,
}

/// Outcome of an order test. `witness` names an index pair violating the
/// tested inequality and is present exactly when the test did not hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrderVerdict {
    pub relation: Relation,
    pub witness: Option<(usize, usize)>,
}

impl OrderVerdict {
    fn pass(relation: Relation) -> Self {
        Self {
            relation,
            witness: None,
        }
    }

    fn fail(witness: (usize, usize)) -> Self {
        Self {
            relation: Relation::Incomparable,
            witness: Some(witness),
        }
    }

    pub fn holds(&self) -> bool {
        self.witness.is_none() && self.relation != Relation::Incomparable
    }

    /// True when the verdict certifies `x1 >= x2` (Equal included).
    pub fn is_geq(&self) -> bool {
        matches!(self.relation, Relation::GreaterOrEqual | Relation::Equal)
    }

    /// True when the verdict certifies `x1 <= x2` (Equal included).
    pub fn is_leq(&self) -> bool {
        matches!(self.relation, Relation::LessOrEqual | Relation::Equal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Ascending,
    Descending,
}

/// First `(i, j)` with `i > j` violating `x1 >=_r x2`, if any.
fn mlr_geq_witness(x1: &[f64], x2: &[f64], tol: f64) -> Option<(usize, usize)> {
    for i in 1..x1.len() {
        for j in 0..i {
            if x2[i] * x1[j] > x1[i] * x2[j] + tol {
                return Some((i, j));
            }
        }
    }
    None
}

/// One-sided MLR test `x1 >=_r x2` on raw slices.
pub fn mlr_geq(x1: &[f64], x2: &[f64], tol: f64) -> bool {
    debug_assert_eq!(x1.len(), x2.len());
    mlr_geq_witness(x1, x2, tol).is_none()
}

fn two_sided(ge: Option<(usize, usize)>, le: Option<(usize, usize)>) -> OrderVerdict {
    match (ge, le) {
        (None, None) => OrderVerdict::pass(Relation::Equal),
        (None, Some(_)) => OrderVerdict::pass(Relation::GreaterOrEqual),
        (Some(_), None) => OrderVerdict::pass(Relation::LessOrEqual),
        (Some(w), Some(_)) => OrderVerdict::fail(w),
    }
}

pub fn mlr_compare_with<P: AsRef<[f64]> + ?Sized>(x1: &P, x2: &P, tol: f64) -> Result<OrderVerdict> {
    let (x1, x2) = (x1.as_ref(), x2.as_ref());
    check_dim(x1.len(), x2.len())?;
    Ok(two_sided(
        mlr_geq_witness(x1, x2, tol),
        mlr_geq_witness(x2, x1, tol),
    ))
}

/// Two-sided MLR comparison of `x1` against `x2`.
pub fn mlr_compare<P: AsRef<[f64]> + ?Sized>(x1: &P, x2: &P) -> Result<OrderVerdict> {
    mlr_compare_with(x1, x2, ORDER_TOL)
}

/// First tail index `j` where `x1`'s tail sum falls short of `x2`'s.
fn fosd_geq_witness(x1: &[f64], x2: &[f64], tol: f64) -> Option<(usize, usize)> {
    let (mut t1, mut t2) = (0.0, 0.0);
    for j in (0..x1.len()).rev() {
        t1 += x1[j];
        t2 += x2[j];
        if t1 < t2 - tol {
            return Some((j, x1.len() - 1));
        }
    }
    None
}

pub fn fosd_geq(x1: &[f64], x2: &[f64], tol: f64) -> bool {
    debug_assert_eq!(x1.len(), x2.len());
    fosd_geq_witness(x1, x2, tol).is_none()
}

pub fn fosd_compare_with<P: AsRef<[f64]> + ?Sized>(x1: &P, x2: &P, tol: f64) -> Result<OrderVerdict> {
    let (x1, x2) = (x1.as_ref(), x2.as_ref());
    check_dim(x1.len(), x2.len())?;
    Ok(two_sided(
        fosd_geq_witness(x1, x2, tol),
        fosd_geq_witness(x2, x1, tol),
    ))
}

/// Two-sided first-order stochastic dominance comparison. Witnesses are
/// `(j, X-1)`: the tail `j..X` whose mass is deficient.
pub fn fosd_compare<P: AsRef<[f64]> + ?Sized>(x1: &P, x2: &P) -> Result<OrderVerdict> {
    fosd_compare_with(x1, x2, ORDER_TOL)
}

/// Checks whether consecutive rows of `a` increase (or decrease) in MLR order.
/// On failure the witness is the offending adjacent row pair `(i, i+1)`.
pub fn rows_mlr_ordered_with(a: &TransitionMatrix, direction: Direction, tol: f64) -> OrderVerdict {
    for i in 0..a.n_states().saturating_sub(1) {
        let (lo, hi) = (a.row(i), a.row(i + 1));
        let ok = match direction {
            Direction::Ascending => mlr_geq(hi, lo, tol),
            Direction::Descending => mlr_geq(lo, hi, tol),
        };
        if !ok {
            return OrderVerdict::fail((i, i + 1));
        }
    }
    OrderVerdict::pass(match direction {
        Direction::Ascending => Relation::LessOrEqual,
        Direction::Descending => Relation::GreaterOrEqual,
    })
}

pub fn rows_mlr_ordered(a: &TransitionMatrix, direction: Direction) -> OrderVerdict {
    rows_mlr_ordered_with(a, direction, ORDER_TOL)
}

/// Checks `b[i][m] * b[j][k] >= b[j][m] * b[i][k]` for all `k < m`, `i > j`:
/// the likelihood ratio of a higher observation is nondecreasing in the
/// state. On failure the witness is the column pair `(k, m)`.
pub fn obs_columns_mlr_ordered_with(b: &ObservationMatrix, tol: f64) -> OrderVerdict {
    let (nx, ny) = (b.n_states(), b.n_obs());
    for m in 1..ny {
        for k in 0..m {
            for i in 1..nx {
                for j in 0..i {
                    if b.get(i, m) * b.get(j, k) < b.get(j, m) * b.get(i, k) - tol {
                        return OrderVerdict::fail((k, m));
                    }
                }
            }
        }
    }
    OrderVerdict::pass(Relation::LessOrEqual)
}

pub fn obs_columns_mlr_ordered(b: &ObservationMatrix) -> OrderVerdict {
    obs_columns_mlr_ordered_with(b, ORDER_TOL)
}

pub fn sort_by_mlr_with<P: AsRef<[f64]>>(beliefs: &[P], tol: f64) -> Result<Vec<usize>> {
    let n = beliefs.len();
    for l in 0..n {
        for k in (l + 1)..n {
            let v = mlr_compare_with(beliefs[l].as_ref(), beliefs[k].as_ref(), tol)?;
            if v.relation == Relation::Incomparable {
                return Err(Error::IncomparablePair(l, k));
            }
        }
    }
    // Insertion sort, greatest first; an element only overtakes strictly
    // smaller ones so equal beliefs keep their original order.
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for idx in 0..n {
        let x = beliefs[idx].as_ref();
        let pos = order
            .iter()
            .position(|&o| {
                let y = beliefs[o].as_ref();
                mlr_geq(x, y, tol) && !mlr_geq(y, x, tol)
            })
            .unwrap_or(order.len());
        order.insert(pos, idx);
    }
    Ok(order)
}

/// Indices ordering `beliefs` from MLR-greatest to MLR-least, stable among
/// equal entries. Fails with [`Error::IncomparablePair`] if any pair of
/// beliefs is not MLR-comparable.
pub fn sort_by_mlr<P: AsRef<[f64]>>(beliefs: &[P]) -> Result<Vec<usize>> {
    sort_by_mlr_with(beliefs, ORDER_TOL)
}

/// True when `chain` is MLR-nondecreasing along its length.
pub fn is_mlr_chain<P: AsRef<[f64]>>(chain: &[P], direction: Direction, tol: f64) -> bool {
    chain.windows(2).all(|w| {
        let (lo, hi) = (w[0].as_ref(), w[1].as_ref());
        match direction {
            Direction::Ascending => mlr_geq(hi, lo, tol),
            Direction::Descending => mlr_geq(lo, hi, tol),
        }
    })
}
