//! Structure of the value functions: linearity under a frozen plan, the
//! exchange property, Bellman consistency and the sensitivity bounds.

mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use restless_core::assumptions::Regime;
use restless_core::belief::{BeliefVector, InstanceDoc, ModelInstance};
use restless_core::bounds::{check_bounds_suite, increasing_case_bounds, reversed_case_bounds, CaseId};
use restless_core::dp::{optimal_value, DpSolver};
use restless_core::filter::BeliefProfile;
use restless_core::policy::{
    avf_evaluate, avf_evaluate_with_plan, expand, policy_value, value_with_first_action, EvaluationSettings,
    HashedRandomPolicy, MyopicPolicy, PolicyRule, RoundRobinPolicy, StayOnPolicy,
};

fn two_state() -> ModelInstance {
    ModelInstance::from_doc(&InstanceDoc {
        n_projects: 2,
        n_states: 2,
        n_obs: 2,
        beta: 0.5,
        a: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        b: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        r: vec![0.0, 1.0],
        x0: vec![vec![0.5, 0.5], vec![0.2, 0.8]],
    })
    .unwrap()
}

/// Profile at slot `t` whose beliefs are mixtures of the extreme rows of `A`.
fn band_profile<R: Rng>(rng: &mut R, inst: &ModelInstance, t: usize) -> BeliefProfile {
    let a = inst.transition();
    let (lo, hi) = (a.row_belief(0), a.row_belief(inst.n_states() - 1));
    let beliefs = (0..inst.n_projects())
        .map(|_| hi.mix(&lo, rng.random::<f64>()).unwrap())
        .collect();
    BeliefProfile::new(beliefs, t)
}

#[test]
fn avf_matches_hand_expanded_two_branch_sum() {
    let inst = two_state();
    let (a, b, r) = rows(&inst);
    let p = BeliefProfile::initial(&inst);
    let s = EvaluationSettings::new(&inst, 1);
    for u in 0..2 {
        let x = &p.beliefs[u];
        let mut expect = dot(&r, x.as_slice());
        for m in 0..2 {
            let (d, post) = filter(&a, &b, x.as_slice(), m);
            let other = propagate(&a, p.beliefs[1 - u].as_slice());
            expect += 0.5 * d * dot(&r, &post).max(dot(&r, &other));
        }
        let got = avf_evaluate(&inst, &p, &s, u).unwrap();
        assert!((got - expect).abs() < 1e-14, "u={u}: {got} vs {expect}");
    }
}

#[test]
fn stay_on_single_project_matches_two_branch_recursion() {
    let doc = InstanceDoc {
        n_projects: 1,
        x0: vec![vec![0.5, 0.5]],
        ..two_state().to_doc()
    };
    let inst = ModelInstance::from_doc(&doc).unwrap();
    let (a, b, r) = rows(&inst);
    let p = BeliefProfile::initial(&inst);
    let v = policy_value(&inst, &p, &EvaluationSettings::new(&inst, 1), &StayOnPolicy(0)).unwrap();
    let mut expect = dot(&r, &[0.5, 0.5]);
    for m in 0..2 {
        let (d, post) = filter(&a, &b, &[0.5, 0.5], m);
        expect += 0.5 * d * dot(&r, &post);
    }
    // 0.5 + 0.5 * (0.45) since the filter averages back to the propagated belief.
    assert!((v.value - expect).abs() < 1e-14);
    assert!((v.value - 0.725).abs() < 1e-14);
}

#[test]
fn terminal_slot_and_zero_discount_give_immediate_reward() {
    let inst = two_state();
    let p = BeliefProfile::initial(&inst);
    assert!((avf_evaluate(&inst, &p, &EvaluationSettings::new(&inst, 0), 0).unwrap() - 0.5).abs() < 1e-15);
    let flat = inst.with_beta(0.0).unwrap();
    assert!((avf_evaluate(&flat, &p, &EvaluationSettings::new(&flat, 4), 0).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn dp_matches_exhaustive_action_trees() {
    for seed in 0..20u64 {
        let mut r = rng(seed);
        let beta = r.random_range(0.3..0.9);
        let inst = unconstrained(&mut r, 2, 2, 2, beta);
        let (a, b, rw) = rows(&inst);
        let x0: Vec<Vec<f64>> = inst.initial_beliefs().iter().map(|x| x.as_slice().to_vec()).collect();
        let trees = all_tree_values(&a, &b, &rw, inst.beta(), &x0, 0, 2);
        assert_eq!(trees.len(), 128);
        let best = trees.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (v, _) = optimal_value(&inst, &BeliefProfile::initial(&inst), 2).unwrap();
        assert!((v - best).abs() <= 1e-10, "seed {seed}: {v} vs {best}");
    }
}

#[test]
fn optimal_value_dominates_simple_policies() {
    for seed in 0..15u64 {
        let mut r = rng(seed);
        let inst = unconstrained(&mut r, 3, 2, 3, 0.7);
        let p = BeliefProfile::initial(&inst);
        let s = EvaluationSettings::new(&inst, 3);
        let (v, _) = optimal_value(&inst, &p, 3).unwrap();
        let policies: Vec<Box<dyn PolicyRule>> = vec![
            Box::new(MyopicPolicy),
            Box::new(RoundRobinPolicy),
            Box::new(StayOnPolicy(1)),
            Box::new(HashedRandomPolicy { seed }),
        ];
        for pol in &policies {
            assert!(v >= policy_value(&inst, &p, &s, pol.as_ref()).unwrap().value - 1e-9);
        }
    }
}

#[test]
fn bellman_consistency_at_interior_nodes() {
    for seed in 0..10u64 {
        let mut r = rng(seed);
        let inst = unconstrained(&mut r, 3, 3, 2, 0.6);
        let horizon = 3;
        let s = EvaluationSettings::new(&inst, horizon);
        let mut solver = DpSolver::new(&inst, horizon);
        let mut p = BeliefProfile::initial(&inst);
        for _ in 0..horizon {
            let (v, _) = solver.optimal_value(&p).unwrap();
            let rw = inst.reward();
            let best = (0..inst.n_projects())
                .map(|u| {
                    let mut q = rw.dot(p.beliefs[u].as_slice());
                    let mut fresh = DpSolver::with_settings(&inst, s, false);
                    for (_, d, next) in expand(&inst, &p, u, 0.0).unwrap() {
                        q += inst.beta() * d * fresh.optimal_value(&next).unwrap().0;
                    }
                    q
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((v - best).abs() <= 1e-12, "seed {seed} t {}", p.time);
            let u = r.random_range(0..inst.n_projects());
            let branches = expand(&inst, &p, u, 0.0).unwrap();
            p = branches[r.random_range(0..branches.len())].2.clone();
        }
    }
}

#[test]
fn myopic_policy_value_equals_avf_of_myopic_action() {
    for seed in 0..10u64 {
        let inst = regime1(3, 2, 3, 0.6, seed);
        let p = BeliefProfile::initial(&inst);
        let s = EvaluationSettings::new(&inst, 3);
        let u = MyopicPolicy.action(&inst, &p).unwrap();
        let pv = policy_value(&inst, &p, &s, &MyopicPolicy).unwrap().value;
        assert!((pv - avf_evaluate(&inst, &p, &s, u).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn value_grows_with_horizon_for_nonnegative_rewards() {
    for seed in 0..10u64 {
        let mut r = rng(seed);
        let inst = unconstrained(&mut r, 3, 2, 2, 0.8);
        let p = BeliefProfile::initial(&inst);
        let mut prev = f64::NEG_INFINITY;
        for t in 0..4 {
            let v = policy_value(&inst, &p, &EvaluationSettings::new(&inst, t), &MyopicPolicy).unwrap().value;
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn frozen_plan_value_is_linear_in_each_belief(
        x in 2usize..=3, y in 2usize..=3, n in 2usize..=3, remaining in 1usize..=3, seed in any::<u64>()
    ) {
        let mut r = rng(seed);
        let inst = unconstrained(&mut r, x, y, n, 0.7);
        let t = r.random_range(0..=2usize);
        let s = EvaluationSettings::new(&inst, t + remaining);
        let beliefs: Vec<BeliefVector> = (0..n).map(|_| belief(random_simplex(&mut r, x))).collect();
        let p = BeliefProfile::new(beliefs, t);
        let (k, u) = (r.random_range(0..n), r.random_range(0..n));
        let whole = avf_evaluate_with_plan(&inst, &p, &p, &s, u).unwrap();
        let mut parts = 0.0;
        for i in 0..x {
            let pi = p.with_belief(k, BeliefVector::basis(i, x).unwrap());
            parts += p.beliefs[k].as_slice()[i] * avf_evaluate_with_plan(&inst, &pi, &p, &s, u).unwrap();
        }
        prop_assert!((whole - parts).abs() <= 1e-9, "{} vs {}", whole, parts);
        // The frozen plan reproduces the ordinary value on the reference itself.
        prop_assert!((whole - avf_evaluate(&inst, &p, &s, u).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn better_belief_earns_more_when_worked_first(
        x in 2usize..=3, y in 2usize..=3, n in 2usize..=3, remaining in 0usize..=3, seed in any::<u64>()
    ) {
        let inst = regime1(x, y, n, 0.6, seed);
        let mut r = rng(seed);
        let t = r.random_range(1..=2usize);
        let p = band_profile(&mut r, &inst, t);
        let s = EvaluationSettings::new(&inst, t + remaining);
        for l in 0..n {
            for k in 0..n {
                let rel = restless_core::orders::mlr_compare(&p.beliefs[l], &p.beliefs[k]).unwrap();
                if l != k && rel.is_geq() {
                    let wl = avf_evaluate(&inst, &p, &s, l).unwrap();
                    let wk = avf_evaluate(&inst, &p, &s, k).unwrap();
                    prop_assert!(wl >= wk - 1e-12, "W^{} = {} < W^{} = {}", l, wl, k, wk);
                }
            }
        }
    }

    #[test]
    fn staying_on_one_project_attains_the_first_case_upper_bound(
        x in 2usize..=3, y in 2usize..=3, n in 1usize..=3, remaining in 0usize..=4, seed in any::<u64>()
    ) {
        let inst = regime1(x, y, n, 0.6, seed);
        let mut r = rng(seed);
        let chain = restless_core::bounds::sample_mlr_chain(&mut r, x, 2).unwrap();
        let l = r.random_range(0..n);
        let p = band_profile(&mut r, &inst, 1);
        let (lo, hi) = (p.with_belief(l, chain[0].clone()), p.with_belief(l, chain[1].clone()));
        let s = EvaluationSettings::new(&inst, 1 + remaining);
        let stay = StayOnPolicy(l);
        let dw = value_with_first_action(&inst, &hi, &s, l, &stay).unwrap().value
            - value_with_first_action(&inst, &lo, &s, l, &stay).unwrap().value;
        let (_, upper) = increasing_case_bounds(&inst, remaining, &chain[0], &chain[1])
            .unwrap()
            .get(CaseId::C1)
            .unwrap();
        let (a, _, rw) = rows(&inst);
        let delta = chain[1].diff(&chain[0]).unwrap();
        let oracle = discounted_power_sum(&a, &rw, inst.beta(), &delta, 0, remaining);
        prop_assert!((upper - oracle).abs() <= 1e-12);
        prop_assert!((dw - upper).abs() <= 1e-9, "{} vs {}", dw, upper);
    }
}

#[test]
fn bound_intervals_on_a_hand_instance() {
    let inst = two_state();
    let lo = belief(vec![0.65, 0.35]);
    let hi = belief(vec![0.35, 0.65]);
    let delta = [-0.3, 0.3];
    let (a, _, r) = rows(&inst);
    let b = increasing_case_bounds(&inst, 2, &lo, &hi).unwrap();
    // delta, A'delta = [-0.21, 0.21], (A')^2 delta = [-0.147, 0.147]
    let all = 0.3 + 0.5 * 0.21 + 0.25 * 0.147;
    assert!((b.get(CaseId::C1).unwrap().0 - 0.3).abs() < 1e-15);
    assert!((b.get(CaseId::C1).unwrap().1 - all).abs() < 1e-15);
    assert!((b.get(CaseId::C2).unwrap().1 - (all - 0.3)).abs() < 1e-15);
    assert!((discounted_power_sum(&a, &r, 0.5, &delta, 0, 2) - all).abs() < 1e-15);

    let d = reversed_case_bounds(&inst, 2, &lo, &hi).unwrap();
    assert!((d.get(CaseId::D1).unwrap().0 - (0.3 - 0.5 * 0.21)).abs() < 1e-15);
    assert!((d.get(CaseId::D1).unwrap().1 - (0.3 + 0.25 * 0.147)).abs() < 1e-15);
    assert!((d.get(CaseId::D2).unwrap().0 + 0.5 * 0.21).abs() < 1e-15);

    let flat = increasing_case_bounds(&inst, 0, &lo, &hi).unwrap();
    assert_eq!(flat.get(CaseId::C1).unwrap().0, flat.get(CaseId::C1).unwrap().1);
    let same = increasing_case_bounds(&inst, 3, &lo, &lo).unwrap();
    assert!(same.cases.iter().all(|(_, l, h)| *l == 0.0 && *h == 0.0));
    assert!(increasing_case_bounds(&inst, 1, &hi, &lo).is_err());
}

#[test]
fn sampled_bound_suites_hold_in_both_regimes() {
    for seed in 0..6u64 {
        let i1 = regime1(3, 2, 3, 0.5, seed);
        let s1 = check_bounds_suite(&i1, Regime::Assumption1, 60, seed, true).unwrap();
        assert_eq!(s1.violations, 0, "worst slack {}", s1.worst_slack);
        let i2 = regime2(3, 3, 3, 0.5, seed);
        let s2 = check_bounds_suite(&i2, Regime::Assumption2, 60, seed, true).unwrap();
        assert_eq!(s2.violations, 0, "worst slack {}", s2.worst_slack);
    }
}

#[test]
fn identical_pair_has_zero_difference() {
    let inst = regime1(3, 3, 2, 0.5, 4);
    let p = BeliefProfile::initial(&inst);
    let s = EvaluationSettings::new(&inst, 3);
    let x = p.beliefs[0].clone();
    let b = increasing_case_bounds(&inst, 2, &x, &x).unwrap();
    let dw = avf_evaluate(&inst, &p.with_belief(0, x.clone()), &s, 0).unwrap() - avf_evaluate(&inst, &p, &s, 0).unwrap();
    assert_eq!(dw, 0.0);
    for (_, lo, hi) in b.cases {
        assert!(lo <= dw && dw <= hi);
    }
}
