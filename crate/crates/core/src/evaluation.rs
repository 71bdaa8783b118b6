//! Information criteria, partition agreement and imputation error.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub loglik: f64,
    pub n_params: usize,
    pub bic: f64,
    pub awe: f64,
    pub entropy: f64,
}

impl SelectionScore {
    pub fn new(loglik: f64, posterior: &DMatrix<f64>, n_params: usize) -> Self {
        let n = posterior.nrows();
        let b = bic(loglik, n_params, n);
        Self {
            loglik,
            n_params,
            bic: b,
            awe: awe(b, posterior, n_params, n),
            entropy: entropy(posterior),
        }
    }
}

/// Mixing weights, `μ`, `β`, `λ`, `ω`, `Λ` and diagonal `Ψ`:
/// `(G-1) + G(2p + 2 + pq + p)`.
pub fn n_free_params(g: usize, p: usize, q: usize) -> usize {
    (g - 1) + g * (2 * p + 2 + p * q + p)
}

pub fn bic(loglik: f64, n_params: usize, n: usize) -> f64 {
    2.0 * loglik - n_params as f64 * (n as f64).ln()
}

/// `-Σ_i Σ_g z_ig log z_ig` with `0 log 0 = 0`.
pub fn entropy(posterior: &DMatrix<f64>) -> f64 {
    -posterior
        .iter()
        .filter(|&&z| z > 0.0)
        .map(|&z| z * z.ln())
        .sum::<f64>()
}

pub fn awe(bic: f64, posterior: &DMatrix<f64>, n_params: usize, n: usize) -> f64 {
    bic - 2.0 * entropy(posterior) - n_params as f64 * (3.0 + (n as f64).ln())
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn contingency(a: &[usize], b: &[usize]) -> Result<(Vec<Vec<u64>>, usize, usize)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (ra, ka) = relabel(a);
    let (rb, kb) = relabel(b);
    let mut t = vec![vec![0u64; kb]; ka];
    for (x, y) in ra.iter().zip(&rb) {
        t[*x][*y] += 1;
    }
    Ok((t, ka, kb))
}

fn choose2(v: u64) -> f64 {
    let v = v as f64;
    v * (v - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index.
pub fn ari(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    let (t, _, kb) = contingency(labels_a, labels_b)?;
    let n = labels_a.len() as u64;
    let index: f64 = t.iter().flatten().map(|&v| choose2(v)).sum();
    let rows: f64 = t.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| choose2(t.iter().map(|r| r[j]).sum())).sum();
    let total = choose2(n);
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max = 0.5 * (rows + cols);
    if max == expected {
        // Both partitions trivial in the same way.
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Misclassification rate after the best one-to-one matching of predicted
/// clusters to true classes.
pub fn err(labels_pred: &[usize], labels_true: &[usize]) -> Result<f64> {
    let (t, kp, kt) = contingency(labels_pred, labels_true)?;
    let n = labels_pred.len();
    if n == 0 {
        return Ok(0.0);
    }
    let k = kp.max(kt);
    let mut cost = vec![vec![0i64; k]; k];
    for (r, row) in t.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            cost[r][c] = -(v as i64);
        }
    }
    let assignment = min_cost_assignment(&cost);
    let matched: u64 = assignment
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < kp && c < kt)
        .map(|(r, &c)| t[r][c])
        .sum();
    Ok((n as u64 - matched) as f64 / n as f64)
}

/// Hungarian method with potentials on a square cost matrix. Returns the
/// column assigned to each row.
pub(crate) fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays with a dummy column 0.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Mean squared error over the cells flagged in `removed`.
pub fn imputation_mse(truth: &DataMatrix, imputed: &DataMatrix, removed: &[bool]) -> Result<f64> {
    let (n, p) = (truth.nrows(), truth.ncols());
    if imputed.nrows() != n || imputed.ncols() != p || removed.len() != n * p {
        return Err(Error::DimensionMismatch {
            expected: n * p,
            found: removed.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..p {
            if removed[i * p + j] {
                let t = truth.get(i, j).ok_or_else(|| {
                    Error::InvalidData(format!("truth is missing cell ({i}, {j})"))
                })?;
                let v = imputed.get(i, j).ok_or_else(|| {
                    Error::InvalidData(format!("imputed matrix is missing cell ({i}, {j})"))
                })?;
                sum += (t - v) * (t - v);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidData("no missing cells to score".into()));
    }
    Ok(sum / count as f64)
}
