//! Eigen-analysis of the transition matrix and the discounted series matrix.
//!
//! With `A = V Λ V⁻¹` (real, diagonalizable) and
//! `Υ = diag(1, βλ₂/(1-βλ₂), ..., βλ_X/(1-βλ_X))`, the matrix `Q = V Υ V⁻¹`
//! satisfies `R'Q'δ = R' Σ_{i≥1} (βA')^i δ` for every belief difference `δ`:
//! the component of `δ` along the unit eigenvalue vanishes because `1'δ = 0`,
//! so the first diagonal entry of `Υ` is irrelevant and is fixed to 1.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::belief::{check_dim, BeliefVector, RewardVector, TransitionMatrix};
use crate::error::{Error, Result};
use crate::orders::{OrderVerdict, Relation};

/// Imaginary parts above this reject the spectrum as complex.
pub const IMAG_TOL: f64 = 1e-9;
/// Eigenvalues closer than this are treated as one repeated eigenvalue.
const CLUSTER_TOL: f64 = 1e-7;
/// Maximum entry-wise reconstruction error `|A - VΛV⁻¹|`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Slack on the reward-separation margins.
pub const SEPARATION_TOL: f64 = 1e-10;
/// Hard cap on the number of series terms.
pub const MAX_SERIES_TERMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Sorted descending; `eigenvalues[0]` is 1.
    pub eigenvalues: Vec<f64>,
    /// Columns are right eigenvectors; column 0 is proportional to the ones vector.
    pub v: DMatrix<f64>,
    pub v_inv: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub residual: f64,
}

impl SpectralDecomposition {
    /// Largest modulus among the non-leading eigenvalues.
    pub fn subdominant_modulus(&self) -> f64 {
        self.eigenvalues[1..].iter().fold(0.0, |m, l| m.max(l.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountMatrices {
    /// Diagonal of `Υ`.
    pub upsilon: Vec<f64>,
    pub q: DMatrix<f64>,
}

pub fn to_dmatrix(a: &TransitionMatrix) -> DMatrix<f64> {
    let n = a.n_states();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j))
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Orthonormal basis for the approximate null space of `m` of dimension `k`,
/// seeded with `seed` vectors that are known to lie in it.
fn null_basis(m: &DMatrix<f64>, k: usize, seed: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.nrows();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut candidates: Vec<Vec<f64>> = seed.to_vec();
    candidates.extend(idx.iter().take(k).map(|&r| (0..n).map(|c| v_t[(r, c)]).collect()));

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for mut c in candidates {
        if basis.len() == k {
            break;
        }
        for q in &basis {
            let dot: f64 = c.iter().zip(q).map(|(a, b)| a * b).sum();
            c.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            c.iter_mut().for_each(|x| *x /= norm);
            basis.push(c);
        }
    }
    basis
}

/// Real diagonalization `A = V Λ V⁻¹` with eigenvalues sorted descending.
pub fn eigendecompose(a: &TransitionMatrix) -> Result<SpectralDecomposition> {
    let n = a.n_states();
    let am = to_dmatrix(a);
    let complex = am.complex_eigenvalues();
    let mut eigenvalues = Vec::with_capacity(n);
    for z in complex.iter() {
        if z.im.abs() > IMAG_TOL {
            return Err(Error::ComplexSpectrum { re: z.re, im: z.im });
        }
        eigenvalues.push(z.re);
    }
    eigenvalues.sort_by(|x, y| y.total_cmp(x));

    if (eigenvalues[0] - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSpectrum(format!(
            "leading eigenvalue {} is not 1",
            eigenvalues[0]
        )));
    }
    if let Some(l) = eigenvalues.iter().find(|l| l.abs() > 1.0 + 1e-9) {
        return Err(Error::InvalidSpectrum(format!("eigenvalue {l} exceeds 1 in modulus")));
    }

    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (eigenvalues[start] - eigenvalues[end]).abs() <= CLUSTER_TOL {
            end += 1;
        }
        let k = end - start;
        let mean = eigenvalues[start..end].iter().sum::<f64>() / k as f64;
        let shifted = &am - DMatrix::identity(n, n) * mean;
        let seed = if start == 0 { vec![ones.clone()] } else { Vec::new() };
        let basis = null_basis(&shifted, k, &seed);
        if basis.len() < k {
            return Err(Error::NonDiagonalizable { residual: f64::INFINITY });
        }
        columns.extend(basis);
        start = end;
    }

    let v = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or(Error::NonDiagonalizable { residual: f64::INFINITY })?;
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigenvalues.clone()));
    let recon = &v * &lambda * &v_inv;
    let residual = (&am - recon).abs().max();
    if residual.is_nan() || residual > RESIDUAL_TOL {
        return Err(Error::NonDiagonalizable { residual });
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        v,
        v_inv,
        lambda,
        residual,
    })
}

/// `Υ` and `Q = V Υ V⁻¹` for discount factor `beta`.
pub fn discount_matrices(dec: &SpectralDecomposition, beta: f64) -> Result<DiscountMatrices> {
    if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
        return Err(Error::InvalidArgument(format!("beta out of range [0, 1): {beta}")));
    }
    let upsilon: Vec<f64> = dec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| if i == 0 { 1.0 } else { beta * l / (1.0 - beta * l) })
        .collect();
    let ups = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(upsilon.clone()));
    let q = &dec.v * ups * &dec.v_inv;
    Ok(DiscountMatrices { upsilon, q })
}

/// `R' Σ_{i=1..n_terms} (βA')^i (x1 - x2)` by direct accumulation.
pub fn series_difference_oracle(
    r: &RewardVector,
    a: &TransitionMatrix,
    beta: f64,
    x1: &BeliefVector,
    x2: &BeliefVector,
    n_terms: usize,
) -> Result<f64> {
    check_dim(a.n_states(), r.len())?;
    let mut v = x1.diff(x2)?;
    check_dim(a.n_states(), v.len())?;
    let mut total = 0.0;
    for _ in 0..n_terms {
        v = a.transpose_apply(&v);
        v.iter_mut().for_each(|x| *x *= beta);
        total += r.dot(&v);
    }
    Ok(total)
}

/// Closed form `R'Q'δ = (QR)'δ`.
pub fn series_closed_form(r: &RewardVector, q: &DMatrix<f64>, delta: &[f64]) -> f64 {
    let qr = q * nalgebra::DVector::from_column_slice(r.as_slice());
    qr.iter().zip(delta).map(|(a, b)| a * b).sum()
}

/// Terms needed for the geometric tail `(β ρ₂)^n` to fall below 1e-12,
/// where `ρ₂` is the subdominant eigenvalue modulus.
pub fn default_series_terms(beta: f64, subdominant_modulus: f64) -> usize {
    let rate = beta * subdominant_modulus.max(f64::EPSILON);
    if rate <= 0.0 {
        return 1;
    }
    let n = (1e-12f64.ln() / rate.ln()).ceil();
    if !n.is_finite() || n > MAX_SERIES_TERMS as f64 {
        MAX_SERIES_TERMS
    } else {
        (n as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub verdict: OrderVerdict,
    /// `margins[i] = (R(i+1)-R(i)) - ((QR)(i+1)-(QR)(i))`, zero-based `i`.
    pub margins: Vec<f64>,
    /// Smallest margin over all ordered state pairs `i > j`.
    pub min_pair_margin: f64,
    /// Whether the all-pairs margins agree with the adjacent verdict.
    pub pairs_consistent: bool,
}

/// Checks that reward gaps dominate their discounted-series counterparts:
/// `R'(e_{i+1} - e_i) >= R'Q'(e_{i+1} - e_i)` for every adjacent pair.
pub fn reward_separation_check(r: &RewardVector, q: &DMatrix<f64>) -> Result<SeparationReport> {
    let n = r.len();
    check_dim(n, q.nrows())?;
    check_dim(n, q.ncols())?;
    let qr = q * nalgebra::DVector::from_column_slice(r.as_slice());
    let rv = r.as_slice();
    let pair_margin = |i: usize, j: usize| (rv[i] - rv[j]) - (qr[i] - qr[j]);
    let margins: Vec<f64> = (0..n.saturating_sub(1)).map(|i| pair_margin(i + 1, i)).collect();
    let failing = margins.iter().position(|m| *m < -SEPARATION_TOL);
    let verdict = match failing {
        None => OrderVerdict {
            relation: Relation::GreaterOrEqual,
            witness: None,
        },
        Some(i) => OrderVerdict {
            relation: Relation::Incomparable,
            witness: Some((i, i + 1)),
        },
    };
    let mut min_pair_margin = f64::INFINITY;
    let mut pairs_consistent = true;
    for i in 1..n {
        for j in 0..i {
            let m = pair_margin(i, j);
            min_pair_margin = min_pair_margin.min(m);
            // Pair margins telescope into adjacent ones.
            if failing.is_none() && m < -SEPARATION_TOL * (i - j) as f64 {
                pairs_consistent = false;
            }
        }
    }
    Ok(SeparationReport {
        verdict,
        margins,
        min_pair_margin,
        pairs_consistent,
    })
}
