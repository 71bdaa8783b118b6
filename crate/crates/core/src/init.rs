//! Starting values: mean imputation, k-means labels, moment estimates and
//! eigen-decomposition loadings.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sorted_eigen};
use crate::model::MghfaModel;

pub const MIN_INIT_PSI: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub beta0_scale: f64,
    pub lambda0: f64,
    pub omega0: f64,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kmeans_restarts: 10,
            kmeans_max_iter: 100,
            beta0_scale: 1e-3,
            lambda0: 1.0,
            omega0: 1.0,
            seed: 0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::invalid("omega0", format!("must be positive, got {}", self.omega0)));
        }
        if !self.lambda0.is_finite() || !self.beta0_scale.is_finite() {
            return Err(Error::invalid("init", "lambda0 and beta0_scale must be finite"));
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::invalid("kmeans_restarts", "must be at least 1"));
        }
        Ok(())
    }
}

/// Per-column means of the observed cells.
pub fn column_means(d: &DataMatrix) -> Result<Vec<f64>> {
    let (n, p) = (d.nrows(), d.ncols());
    let mut sum = vec![0.0; p];
    let mut count = vec![0usize; p];
    for i in 0..n {
        for j in 0..p {
            if d.is_observed(i, j) {
                sum[j] += d.observed(i, j);
                count[j] += 1;
            }
        }
    }
    (0..p)
        .map(|j| {
            if count[j] == 0 {
                Err(Error::InvalidData(format!("column {j} has no observed values")))
            } else {
                Ok(sum[j] / count[j] as f64)
            }
        })
        .collect()
}

/// Replaces each missing cell with its column's observed mean.
pub fn mean_impute(d: &DataMatrix) -> Result<DataMatrix> {
    let means = column_means(d)?;
    d.filled(|_, j| means[j])
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn kmeanspp<R: Rng + ?Sized>(d: &DataMatrix, g: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = d.nrows();
    let mut centers = vec![d.row(rng.random_range(0..n)).to_vec()];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(d.row(i), &centers[0])).collect();
    while centers.len() < g {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = d.row(pick).to_vec();
        for i in 0..n {
            dist[i] = dist[i].min(sq_dist(d.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(d: &DataMatrix, mut centers: Vec<Vec<f64>>, max_iter: usize) -> (Vec<usize>, f64) {
    let (n, p) = (d.nrows(), d.ncols());
    let g = centers.len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for i in 0..n {
            let (k, _) = nearest(d.row(i), &centers);
            if labels[i] != k {
                labels[i] = k;
                changed = true;
            }
        }
        let mut counts = vec![0usize; g];
        for &k in &labels {
            counts[k] += 1;
        }
        // Empty clusters take the point farthest from its own centre.
        for k in 0..g {
            if counts[k] == 0 {
                let mut far = (0, -1.0);
                for i in 0..n {
                    if counts[labels[i]] > 1 {
                        let dd = sq_dist(d.row(i), &centers[labels[i]]);
                        if dd > far.1 {
                            far = (i, dd);
                        }
                    }
                }
                counts[labels[far.0]] -= 1;
                labels[far.0] = k;
                counts[k] = 1;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; p]; g];
        for i in 0..n {
            for (s, x) in sums[labels[i]].iter_mut().zip(d.row(i)) {
                *s += x;
            }
        }
        for k in 0..g {
            for j in 0..p {
                centers[k][j] = sums[k][j] / counts[k] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let wcss = (0..n).map(|i| sq_dist(d.row(i), &centers[labels[i]])).sum();
    (labels, wcss)
}

/// Lloyd's algorithm from k-means++ seeds; the restart with the smallest
/// within-cluster sum of squares wins (earliest on ties).
pub fn kmeans<R: Rng + ?Sized>(d: &DataMatrix, g: usize, cfg: &InitConfig, rng: &mut R) -> Result<Vec<usize>> {
    if !d.is_complete() {
        return Err(Error::InvalidData("k-means needs a complete matrix".into()));
    }
    if g == 0 || d.nrows() < g {
        return Err(Error::invalid("G", format!("need 1 <= G <= n, got G = {g}, n = {}", d.nrows())));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..cfg.kmeans_restarts.max(1) {
        let centers = kmeanspp(d, g, rng);
        let (labels, wcss) = lloyd(d, centers, cfg.kmeans_max_iter);
        if best.as_ref().is_none_or(|b| wcss < b.1) {
            best = Some((labels, wcss));
        }
    }
    Ok(best.map(|b| b.0).unwrap_or_default())
}

/// Moment and eigen-decomposition starting values from hard labels on a
/// complete matrix.
pub fn params_from_labels(
    d: &DataMatrix,
    labels: &[usize],
    g: usize,
    q: usize,
    cfg: &InitConfig,
) -> Result<MghfaModel> {
    cfg.validate()?;
    let (n, p) = (d.nrows(), d.ncols());
    if !d.is_complete() {
        return Err(Error::InvalidData("initial moments need a complete matrix".into()));
    }
    if q >= p {
        return Err(Error::invalid("q", format!("must be below p = {p}, got {q}")));
    }
    let mut pi = Vec::with_capacity(g);
    let mut mu = Vec::with_capacity(g);
    let mut loadings = Vec::with_capacity(g);
    let mut psi = Vec::with_capacity(g);
    for k in 0..g {
        let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == k).collect();
        let ng = rows.len();
        if ng < 2 {
            return Err(Error::DegenerateComponent {
                component: k,
                iteration: 0,
                mass: ng as f64,
            });
        }
        let mut m = DVector::zeros(p);
        for &i in &rows {
            for j in 0..p {
                m[j] += d.observed(i, j);
            }
        }
        m /= ng as f64;
        let mut s = DMatrix::zeros(p, p);
        for &i in &rows {
            let x = DVector::from_iterator(p, (0..p).map(|j| d.observed(i, j) - m[j]));
            s.ger(1.0, &x, &x, 1.0);
        }
        s /= ng as f64;
        if cholesky(&s, "scatter").is_err() {
            let ridge = 1e-6 * s.trace() / p as f64;
            for j in 0..p {
                s[(j, j)] += ridge.max(f64::MIN_POSITIVE);
            }
        }
        let (vals, vecs) = sorted_eigen(&s);
        let mut l = DMatrix::zeros(p, q);
        for j in 0..q {
            let scale = vals[j].max(0.0).sqrt();
            l.set_column(j, &(vecs.column(j) * scale));
        }
        let ll = &l * l.transpose();
        let ps = DVector::from_iterator(p, (0..p).map(|j| (s[(j, j)] - ll[(j, j)]).max(MIN_INIT_PSI)));
        pi.push(ng as f64 / n as f64);
        mu.push(m);
        loadings.push(l);
        psi.push(ps);
    }
    // Rounding can leave the proportions a few ulps off one.
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    let model = MghfaModel {
        g,
        p,
        q,
        pi,
        lambda: vec![cfg.lambda0; g],
        omega: vec![cfg.omega0; g],
        mu,
        beta: vec![DVector::from_element(p, cfg.beta0_scale); g],
        loadings,
        psi,
    };
    model.validate()?;
    Ok(model)
}

/// Mean imputation, k-means, then [`params_from_labels`].
pub fn init_params<R: Rng + ?Sized>(
    d: &DataMatrix,
    g: usize,
    q: usize,
    cfg: &InitConfig,
    rng: &mut R,
) -> Result<MghfaModel> {
    cfg.validate()?;
    let filled = mean_impute(d)?;
    let labels = kmeans(&filled, g, cfg, rng)?;
    params_from_labels(&filled, &labels, g, q, cfg)
}
