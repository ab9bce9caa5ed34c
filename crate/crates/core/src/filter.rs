//! Information-state dynamics.
//!
//! A passive project's belief is pushed through the chain: `x -> A'x`.
//! The worked project is propagated and then conditioned on the emitted
//! observation `m`:
//!
//! ```text
//! d(x, m) = 1' B(m) A'x          T(x, m) = B(m) A'x / d(x, m)
//! ```
//!
//! where `B(m)` is the diagonal matrix built from column `m` of `B`.

use crate::belief::{check_dim, BeliefVector, ModelInstance, ObservationMatrix, TransitionMatrix};
use crate::error::{Error, Result};

/// Likelihoods at or below this are treated as impossible branches.
pub const MIN_LIKELIHOOD: f64 = 1e-300;

/// Allowed mass drift of a filter output before renormalization.
pub const FILTER_MASS_TOL: f64 = 1e-9;

/// The joint information state of all projects at slot `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefProfile {
    pub beliefs: Vec<BeliefVector>,
    pub time: usize,
}

impl BeliefProfile {
    pub fn new(beliefs: Vec<BeliefVector>, time: usize) -> Self {
        Self { beliefs, time }
    }

    pub fn initial(inst: &ModelInstance) -> Self {
        Self::new(inst.initial_beliefs().to_vec(), 0)
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// Same profile with project `n`'s belief replaced.
    pub fn with_belief(&self, n: usize, x: BeliefVector) -> Self {
        let mut beliefs = self.beliefs.clone();
        beliefs[n] = x;
        Self::new(beliefs, self.time)
    }

    /// Memo key: beliefs rounded to a fixed number of decimals. Time is
    /// keyed separately by callers that need it.
    pub fn memo_key(&self) -> Vec<i64> {
        let mut key = Vec::with_capacity(self.beliefs.iter().map(BeliefVector::len).sum());
        for b in &self.beliefs {
            b.push_memo_key(&mut key);
        }
        key
    }
}

/// `A'x`.
pub fn propagate(a: &TransitionMatrix, x: &BeliefVector) -> Result<BeliefVector> {
    check_dim(a.n_states(), x.len())?;
    BeliefVector::new(a.transpose_apply(x.as_slice()))
}

fn check_obs(b: &ObservationMatrix, m: usize) -> Result<()> {
    if m >= b.n_obs() {
        return Err(Error::IndexOutOfRange {
            index: m,
            len: b.n_obs(),
        });
    }
    Ok(())
}

/// Likelihood of observation `m` given an already propagated belief `ax = A'x`.
pub fn likelihood_of_propagated(b: &ObservationMatrix, ax: &[f64], m: usize) -> f64 {
    ax.iter().enumerate().map(|(j, p)| b.get(j, m) * p).sum()
}

/// `d(x, m) = sum_j b[j][m] (A'x)(j)`.
pub fn obs_likelihood(
    a: &TransitionMatrix,
    b: &ObservationMatrix,
    x: &BeliefVector,
    m: usize,
) -> Result<f64> {
    check_dim(a.n_states(), x.len())?;
    check_obs(b, m)?;
    Ok(likelihood_of_propagated(b, &a.transpose_apply(x.as_slice()), m))
}

/// Conditions an already propagated belief `ax` on observation `m`.
pub fn condition_propagated(b: &ObservationMatrix, ax: &[f64], m: usize) -> Result<BeliefVector> {
    check_obs(b, m)?;
    let d = likelihood_of_propagated(b, ax, m);
    if d <= MIN_LIKELIHOOD {
        return Err(Error::ImpossibleObservation { obs: m, likelihood: d });
    }
    let out: Vec<f64> = ax
        .iter()
        .enumerate()
        .map(|(j, p)| b.get(j, m) * p / d)
        .collect();
    let mass: f64 = out.iter().sum();
    if (mass - 1.0).abs() > FILTER_MASS_TOL {
        return Err(Error::MassDrift { mass });
    }
    BeliefVector::new(out)
}

/// `T(x, m)`: Bayes update of the worked project's belief.
pub fn filter_update(
    a: &TransitionMatrix,
    b: &ObservationMatrix,
    x: &BeliefVector,
    m: usize,
) -> Result<BeliefVector> {
    check_dim(a.n_states(), x.len())?;
    condition_propagated(b, &a.transpose_apply(x.as_slice()), m)
}

/// Advances the whole profile one slot after working project `u` and
/// observing `m`.
pub fn step_profile(
    inst: &ModelInstance,
    profile: &BeliefProfile,
    u: usize,
    m: usize,
) -> Result<BeliefProfile> {
    if u >= profile.len() {
        return Err(Error::IndexOutOfRange {
            index: u,
            len: profile.len(),
        });
    }
    let beliefs = profile
        .beliefs
        .iter()
        .enumerate()
        .map(|(n, x)| {
            if n == u {
                filter_update(inst.transition(), inst.observation(), x, m)
            } else {
                propagate(inst.transition(), x)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeliefProfile::new(beliefs, profile.time + 1))
}

/// The observation branches of working a project with belief `x`: every
/// `(m, d(x, m), T(x, m))` with `d > threshold`. Zero-likelihood branches
/// contribute nothing to any expectation and are skipped.
pub fn branches(
    inst: &ModelInstance,
    x: &BeliefVector,
    threshold: f64,
) -> Result<Vec<(usize, f64, BeliefVector)>> {
    let b = inst.observation();
    let ax = inst.transition().transpose_apply(x.as_slice());
    let mut out = Vec::with_capacity(b.n_obs());
    for m in 0..b.n_obs() {
        let d = likelihood_of_propagated(b, &ax, m);
        if d > threshold.max(MIN_LIKELIHOOD) {
            out.push((m, d, condition_propagated(b, &ax, m)?));
        }
    }
    Ok(out)
}

/// `(A')^k x` as a raw vector.
pub fn propagate_n(a: &TransitionMatrix, x: &[f64], k: usize) -> Vec<f64> {
    let mut v = x.to_vec();
    for _ in 0..k {
        v = a.transpose_apply(&v);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{InstanceDoc, RewardVector};

    fn a2() -> TransitionMatrix {
        TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn b2() -> ObservationMatrix {
        ObservationMatrix::new(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap()
    }

    fn half() -> BeliefVector {
        BeliefVector::uniform(2)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn propagate_examples() {
        let x = BeliefVector::new(vec![0.1, 0.6, 0.3]).unwrap();
        assert_eq!(propagate(&TransitionMatrix::identity(3), &x).unwrap(), x);
        assert!(close(propagate(&a2(), &half()).unwrap().as_slice(), &[0.55, 0.45], 1e-15));
        let r = vec![0.2, 0.5, 0.3];
        let rank_one = TransitionMatrix::new(vec![r.clone(); 3]).unwrap();
        assert!(close(propagate(&rank_one, &x).unwrap().as_slice(), &r, 1e-15));
    }

    #[test]
    fn likelihood_examples() {
        let uniform_b = ObservationMatrix::new(vec![vec![0.25; 4]; 2]).unwrap();
        for m in 0..4 {
            assert!((obs_likelihood(&a2(), &uniform_b, &half(), m).unwrap() - 0.25).abs() < 1e-15);
        }
        let d1 = obs_likelihood(&a2(), &b2(), &half(), 0).unwrap();
        let d2 = obs_likelihood(&a2(), &b2(), &half(), 1).unwrap();
        assert!((d1 - (0.8 * 0.55 + 0.3 * 0.45)).abs() < 1e-15);
        assert!((d1 - 0.575).abs() < 1e-12 && (d2 - 0.425).abs() < 1e-12);
        assert!(matches!(
            obs_likelihood(&a2(), &b2(), &half(), 2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn filter_examples() {
        let flat = ObservationMatrix::new(vec![vec![0.4, 0.6]; 2]).unwrap();
        let t = filter_update(&a2(), &flat, &half(), 1).unwrap();
        assert!(close(t.as_slice(), &[0.55, 0.45], 1e-15));

        let e1 = BeliefVector::basis(0, 2).unwrap();
        let id_a = TransitionMatrix::identity(2);
        let id_b = ObservationMatrix::identity(2);
        assert_eq!(filter_update(&id_a, &id_b, &e1, 0).unwrap(), e1);
        assert!(matches!(
            filter_update(&id_a, &id_b, &e1, 1),
            Err(Error::ImpossibleObservation { obs: 1, .. })
        ));

        let t = filter_update(&a2(), &b2(), &half(), 1).unwrap();
        let expect = [0.2 * 0.55 / 0.425, 0.7 * 0.45 / 0.425];
        assert!(close(t.as_slice(), &expect, 1e-12));
        assert!(close(t.as_slice(), &[0.258824, 0.741176], 1e-6));
    }

    fn instance(n: usize) -> ModelInstance {
        let doc = InstanceDoc {
            n_projects: n,
            n_states: 2,
            n_obs: 2,
            beta: 0.5,
            a: a2().to_rows(),
            b: b2().to_rows(),
            r: RewardVector::new(vec![0.0, 1.0]).unwrap().as_slice().to_vec(),
            x0: vec![vec![0.5, 0.5], vec![0.2, 0.8]][..n].to_vec(),
        };
        ModelInstance::from_doc(&doc).unwrap()
    }

    #[test]
    fn step_profile_examples() {
        let single = instance(1);
        let p = BeliefProfile::initial(&single);
        let s = step_profile(&single, &p, 0, 1).unwrap();
        assert_eq!(s.beliefs[0], filter_update(&a2(), &b2(), &p.beliefs[0], 1).unwrap());
        assert_eq!(s.time, 1);

        let pair = instance(2);
        let p = BeliefProfile::initial(&pair);
        let s0 = step_profile(&pair, &p, 0, 0).unwrap();
        let s1 = step_profile(&pair, &p, 0, 1).unwrap();
        let passive = propagate(&a2(), &p.beliefs[1]).unwrap();
        assert_eq!(s0.beliefs[1], passive);
        assert_eq!(s1.beliefs[1], passive);
        // Entry-wise against the hand oracle: project 1 filtered, project 2 propagated.
        assert!(close(s1.beliefs[0].as_slice(), &[0.11 / 0.425, 0.315 / 0.425], 1e-12));
        assert!(close(s1.beliefs[1].as_slice(), &[0.9 * 0.2 + 0.2 * 0.8, 0.1 * 0.2 + 0.8 * 0.8], 1e-15));
    }

    #[test]
    fn memo_key_identifies_equal_profiles() {
        let a = BeliefProfile::new(vec![BeliefVector::new(vec![0.3, 0.7]).unwrap()], 0);
        let b = BeliefProfile::new(vec![BeliefVector::new(vec![0.3 + 1e-15, 0.7 - 1e-15]).unwrap()], 0);
        assert_eq!(a.memo_key(), b.memo_key());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.001f64..1.0, n).prop_map(|v| {
                let s: f64 = v.iter().sum();
                v.iter().map(|x| x / s).collect()
            })
        }

        fn model() -> impl Strategy<Value = (TransitionMatrix, ObservationMatrix, BeliefVector)> {
            (2usize..5, 1usize..5).prop_flat_map(|(x, y)| {
                (
                    prop::collection::vec(simplex(x), x),
                    prop::collection::vec(simplex(y), x),
                    simplex(x),
                )
                    .prop_map(|(a, b, v)| {
                        (
                            TransitionMatrix::new(a).unwrap(),
                            ObservationMatrix::new(b).unwrap(),
                            BeliefVector::new(v).unwrap(),
                        )
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(2000))]

            #[test]
            fn likelihoods_sum_to_one((a, b, x) in model()) {
                let total: f64 = (0..b.n_obs()).map(|m| obs_likelihood(&a, &b, &x, m).unwrap()).sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
            }

            #[test]
            fn filter_disintegrates_propagation((a, b, x) in model()) {
                let ax = propagate(&a, &x).unwrap();
                let mut mix = vec![0.0; x.len()];
                for m in 0..b.n_obs() {
                    let d = obs_likelihood(&a, &b, &x, m).unwrap();
                    if d > MIN_LIKELIHOOD {
                        let t = filter_update(&a, &b, &x, m).unwrap();
                        for (acc, p) in mix.iter_mut().zip(t.as_slice()) {
                            *acc += d * p;
                        }
                    }
                }
                prop_assert!(close(&mix, ax.as_slice(), 1e-12));
            }
        }
    }
}
