//! Closed-form discounted series against direct accumulation.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use restless_core::belief::{RewardVector, TransitionMatrix};
use restless_core::spectral::{
    default_series_terms, discount_matrices, eigendecompose, reward_separation_check, series_closed_form,
    series_difference_oracle,
};

/// Stochastic matrix with a real spectrum: a tilted TP2 chain, whose
/// eigenvalues are real and distinct for generic draws.
fn real_spectrum_matrix<R: Rng>(rng: &mut R, x: usize) -> Vec<Vec<f64>> {
    tp2_matrix(rng, x, x, true)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn discounted_series_matches_closed_form(x in 2usize..=4, seed in any::<u64>(), beta in 0.0f64..0.9) {
        let mut r = rng(seed);
        let a = real_spectrum_matrix(&mut r, x);
        let tm = TransitionMatrix::new(a.clone()).unwrap();
        let Ok(dec) = eigendecompose(&tm) else { return Ok(()) };
        prop_assume!(dec.subdominant_modulus() <= 0.95);
        let dm = discount_matrices(&dec, beta).unwrap();
        let mut rv: Vec<f64> = (0..x).map(|_| r.random_range(0.0..2.0)).collect();
        rv.sort_by(|p, q| p.partial_cmp(q).unwrap());
        prop_assume!(rv.windows(2).all(|w| w[1] > w[0]));
        let rw = RewardVector::new(rv.clone()).unwrap();
        let (x1, x2) = (random_simplex(&mut r, x), random_simplex(&mut r, x));
        let delta: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| p - q).collect();
        let terms = default_series_terms(beta, dec.subdominant_modulus());
        let oracle = discounted_power_sum(&a, &rv, beta, &delta, 1, terms.max(300));
        let closed = series_closed_form(&rw, &dm.q, &delta);
        prop_assert!((oracle - closed).abs() <= 1e-8, "{} vs {}", oracle, closed);
        let lib = series_difference_oracle(&rw, &tm, beta, &belief(x1), &belief(x2), terms).unwrap();
        prop_assert!((lib - closed).abs() <= 1e-8);
    }

    #[test]
    fn unit_eigenvalue_weight_vanishes_on_belief_differences(x in 2usize..=4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let tm = TransitionMatrix::new(real_spectrum_matrix(&mut r, x)).unwrap();
        let Ok(dec) = eigendecompose(&tm) else { return Ok(()) };
        let delta = DVector::from_vec({
            let (p, q) = (random_simplex(&mut r, x), random_simplex(&mut r, x));
            p.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<_>>()
        });
        let base = dec.v_inv.transpose() * DMatrix::from_diagonal(&DVector::from_vec(dec.eigenvalues.clone()))
            * dec.v.transpose() * &delta;
        for s in [0.0, -3.7, 12.5] {
            let mut lam = dec.eigenvalues.clone();
            lam[0] = s;
            let swapped = dec.v_inv.transpose() * DMatrix::from_diagonal(&DVector::from_vec(lam))
                * dec.v.transpose() * &delta;
            prop_assert!((&swapped - &base).amax() <= 1e-10);
        }
    }

    #[test]
    fn decomposition_reconstructs_the_matrix(x in 2usize..=5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = real_spectrum_matrix(&mut r, x);
        let tm = TransitionMatrix::new(a.clone()).unwrap();
        let Ok(dec) = eigendecompose(&tm) else { return Ok(()) };
        let rebuilt = &dec.v * &dec.lambda * &dec.v_inv;
        let am = DMatrix::from_fn(x, x, |i, j| a[i][j]);
        prop_assert!((rebuilt - am).amax() <= 1e-8);
        prop_assert!((dec.eigenvalues[0] - 1.0).abs() <= 1e-9);
        prop_assert!(dec.eigenvalues.iter().all(|l| l.abs() <= 1.0 + 1e-9));
        prop_assert!(dec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn two_state_spectrum_and_discount_entry() {
    let tm = TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    let dec = eigendecompose(&tm).unwrap();
    assert!((dec.eigenvalues[0] - 1.0).abs() < 1e-12);
    assert!((dec.eigenvalues[1] - 0.7).abs() < 1e-12);
    let dm = discount_matrices(&dec, 0.5).unwrap();
    assert_eq!(dm.upsilon[0], 1.0);
    assert!((dm.upsilon[1] - 7.0 / 13.0).abs() < 1e-12);
}

#[test]
fn zero_discount_separation_matches_series_oracle() {
    let a = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
    let tm = TransitionMatrix::new(a.clone()).unwrap();
    let dm = discount_matrices(&eigendecompose(&tm).unwrap(), 0.0).unwrap();
    let rw = RewardVector::new(vec![0.0, 1.0]).unwrap();
    let sep = reward_separation_check(&rw, &dm.q).unwrap();
    let delta = [-1.0, 1.0];
    // With no discount the series part is empty; Q only carries the stationary projection.
    let expected = 1.0 - series_closed_form(&rw, &dm.q, &delta);
    assert!((sep.margins[0] - expected).abs() < 1e-12);
    assert_eq!(discounted_power_sum(&a, &[0.0, 1.0], 0.0, &delta, 1, 50), 0.0);
    assert!(sep.verdict.holds());
}

#[test]
fn slow_mixing_and_high_discount_break_separation() {
    let tm = TransitionMatrix::new(vec![vec![0.99, 0.01], vec![0.01, 0.99]]).unwrap();
    let dm = discount_matrices(&eigendecompose(&tm).unwrap(), 0.99).unwrap();
    let sep = reward_separation_check(&RewardVector::new(vec![0.0, 1.0]).unwrap(), &dm.q).unwrap();
    assert!(!sep.verdict.holds());
    assert!(sep.margins[0] < 0.0);
}
