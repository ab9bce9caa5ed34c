//! Reference computations written directly from the model definitions,
//! independent of the library's filter, DP and spectral code paths.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use restless_core::belief::{BeliefVector, InstanceDoc, ModelInstance};
use restless_core::generate::{gen_assumption1_instance, gen_assumption2_instance, GeneratorParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn random_stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| random_simplex(rng, cols)).collect()
}

/// `out(j) = sum_i a[i][j] x(i)`.
pub fn propagate(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let n = a[0].len();
    let mut out = vec![0.0; n];
    for (i, row) in a.iter().enumerate() {
        for j in 0..n {
            out[j] += row[j] * x[i];
        }
    }
    out
}

/// `(d(x, m), T(x, m))` with `T` left unnormalized when `d` vanishes.
pub fn filter(a: &[Vec<f64>], b: &[Vec<f64>], x: &[f64], m: usize) -> (f64, Vec<f64>) {
    let ax = propagate(a, x);
    let joint: Vec<f64> = ax.iter().enumerate().map(|(j, p)| p * b[j][m]).collect();
    let d: f64 = joint.iter().sum();
    if d > 0.0 {
        (d, joint.into_iter().map(|v| v / d).collect())
    } else {
        (0.0, joint)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// MLR order through likelihood ratios; both vectors must be strictly positive.
pub fn mlr_geq_by_ratio(x1: &[f64], x2: &[f64], rel_tol: f64) -> bool {
    let ratios: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a / b).collect();
    ratios.windows(2).all(|w| w[1] >= w[0] * (1.0 - rel_tol))
}

pub fn tail_sums(x: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = vec![0.0; x.len()];
    for i in (0..x.len()).rev() {
        acc += x[i];
        out[i] = acc;
    }
    out
}

/// Belief tilted by `exp(theta * i)`.
pub fn tilt(base: &[f64], theta: f64) -> Vec<f64> {
    let w: Vec<f64> = base.iter().enumerate().map(|(i, p)| p * (theta * i as f64).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Matrix whose rows form an MLR chain (ascending or descending).
pub fn tp2_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, ascending: bool) -> Vec<Vec<f64>> {
    let base = random_simplex(rng, cols);
    let mut thetas: Vec<f64> = (0..rows).map(|_| rng.random_range(-2.0..2.0)).collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if !ascending {
        thetas.reverse();
    }
    thetas.iter().map(|t| tilt(&base, *t)).collect()
}

/// Observation matrix with MLR-increasing columns: rows tilted upward in
/// the observation index as the state grows.
pub fn tp2_observation<R: Rng>(rng: &mut R, states: usize, obs: usize) -> Vec<Vec<f64>> {
    tp2_matrix(rng, states, obs, true)
}

/// Random instance with no structural assumption.
pub fn unconstrained<R: Rng>(rng: &mut R, x: usize, y: usize, n: usize, beta: f64) -> ModelInstance {
    let mut r: Vec<f64> = (0..x).map(|_| rng.random_range(0.0..1.0)).collect();
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for i in 1..x {
        if r[i] <= r[i - 1] {
            r[i] = r[i - 1] + 1e-3;
        }
    }
    ModelInstance::from_doc(&InstanceDoc {
        n_projects: n,
        n_states: x,
        n_obs: y,
        beta,
        a: random_stochastic(rng, x, x),
        b: random_stochastic(rng, x, y),
        r,
        x0: (0..n).map(|_| random_simplex(rng, x)).collect(),
    })
    .expect("valid random instance")
}

pub fn regime1(x: usize, y: usize, n: usize, beta: f64, seed: u64) -> ModelInstance {
    gen_assumption1_instance(&GeneratorParams::fixed(x, y, n, beta), seed).expect("assumption-1 instance")
}

pub fn regime2(x: usize, y: usize, n: usize, beta: f64, seed: u64) -> ModelInstance {
    gen_assumption2_instance(&GeneratorParams::fixed(x, y, n, beta), seed).expect("assumption-2 instance")
}

pub fn rows(inst: &ModelInstance) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    (
        inst.transition().to_rows(),
        inst.observation().to_rows(),
        inst.reward().as_slice().to_vec(),
    )
}

pub fn belief(v: Vec<f64>) -> BeliefVector {
    BeliefVector::new(v).expect("valid belief")
}

/// Values of every deterministic closed-loop action tree from `beliefs` at
/// slot `t`, up to slot `horizon`. A tree picks one project per reachable
/// observation history.
pub fn all_tree_values(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    r: &[f64],
    beta: f64,
    beliefs: &[Vec<f64>],
    t: usize,
    horizon: usize,
) -> Vec<f64> {
    let mut out = Vec::new();
    for u in 0..beliefs.len() {
        let now = dot(r, &beliefs[u]);
        if t == horizon {
            out.push(now);
            continue;
        }
        // Every child subtree chosen independently: cartesian product.
        let mut partial = vec![now];
        for m in 0..b[0].len() {
            let (d, post) = filter(a, b, &beliefs[u], m);
            if d <= 1e-300 {
                continue;
            }
            let next: Vec<Vec<f64>> = beliefs
                .iter()
                .enumerate()
                .map(|(n, x)| if n == u { post.clone() } else { propagate(a, x) })
                .collect();
            let child = all_tree_values(a, b, r, beta, &next, t + 1, horizon);
            partial = partial
                .iter()
                .flat_map(|p| child.iter().map(move |c| p + beta * d * c))
                .collect();
        }
        out.extend(partial);
    }
    out
}

/// `sum_{i=from}^{to} beta^i R'(A')^i delta` by repeated propagation.
pub fn discounted_power_sum(a: &[Vec<f64>], r: &[f64], beta: f64, delta: &[f64], from: usize, to: usize) -> f64 {
    let mut v = delta.to_vec();
    let mut total = 0.0;
    let mut scale = 1.0;
    for i in 0..=to {
        if i >= from {
            total += scale * dot(r, &v);
        }
        v = propagate(a, &v);
        scale *= beta;
    }
    total
}
