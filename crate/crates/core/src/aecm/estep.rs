//! Conditional expectations for both AECM cycles.
//!
//! Everything is computed on observed subvectors: for a row with observed
//! coordinates `o` and missing coordinates `m`, `P = (Σ_oo)⁻¹` plays the role
//! of `S^{oo}` and results are scattered back into full `p`-vectors.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{DataMatrix, ObservedPattern};
use crate::error::{Error, Result};
use crate::ghd::{ghd_logpdf_with_log_k, GhdForms};
use crate::gig::{GigMoments, GigParams};
use crate::linalg::factor_inverse;
use crate::model::MghfaModel;
use crate::special::log_bessel_k;

/// Per-(pattern, component) quantities shared by all rows with that pattern.
#[derive(Debug, Clone)]
pub(crate) struct PatternFactor {
    /// `(Σ_oo)⁻¹`
    p_inv: DMatrix<f64>,
    log_det: f64,
    /// `P β_o`
    p_beta: DVector<f64>,
    /// `β_o' P β_o`
    rho: f64,
    /// `Σ_mo P`
    smo_p: DMatrix<f64>,
    /// `β_m − Σ_mo P β_o`
    skew_m: DVector<f64>,
    /// `Σ_mm − Σ_mo P Σ_om`
    cond_cov: DMatrix<f64>,
    /// `Λ_o' P`
    alpha: DMatrix<f64>,
    /// `α β_o`
    alpha_beta: DVector<f64>,
    /// `α Λ_o`
    alpha_lambda: DMatrix<f64>,
}

impl PatternFactor {
    pub(crate) fn new(pat: &ObservedPattern, m: &MghfaModel, k: usize) -> Result<Self> {
        let o = &pat.observed_idx;
        let mi = &pat.missing_idx;
        let l = &m.loadings[k];
        let q = m.q;
        let lo = DMatrix::from_fn(o.len(), q, |r, c| l[(o[r], c)]);
        let lm = DMatrix::from_fn(mi.len(), q, |r, c| l[(mi[r], c)]);
        let psi_o: Vec<f64> = o.iter().map(|&j| m.psi[k][j]).collect();
        let fi = factor_inverse(&lo, &psi_o)?;
        let p_inv = fi.inverse;
        let beta_o = DVector::from_iterator(o.len(), o.iter().map(|&j| m.beta[k][j]));
        let beta_m = DVector::from_iterator(mi.len(), mi.iter().map(|&j| m.beta[k][j]));
        let p_beta = &p_inv * &beta_o;
        let rho = beta_o.dot(&p_beta);
        let s_mo = &lm * lo.transpose();
        let smo_p = &s_mo * &p_inv;
        let skew_m = &beta_m - &smo_p * &beta_o;
        let mut cond_cov = &lm * lm.transpose() - &smo_p * s_mo.transpose();
        for (r, &j) in mi.iter().enumerate() {
            cond_cov[(r, r)] += m.psi[k][j];
        }
        let alpha = lo.transpose() * &p_inv;
        let alpha_beta = &alpha * &beta_o;
        let alpha_lambda = &alpha * &lo;
        Ok(Self {
            p_inv,
            log_det: fi.log_det,
            p_beta,
            rho,
            smo_p,
            skew_m,
            cond_cov,
            alpha,
            alpha_beta,
            alpha_lambda,
        })
    }
}

/// Factors for every (pattern, component) pair plus `log K_λ(ω)` per
/// component.
pub(crate) struct Factors {
    by_pattern: Vec<Vec<PatternFactor>>,
    log_k_lambda: Vec<f64>,
    log_pi: Vec<f64>,
}

impl Factors {
    pub(crate) fn new(d: &DataMatrix, m: &MghfaModel) -> Result<Self> {
        let by_pattern = d
            .patterns()
            .patterns()
            .par_iter()
            .map(|pat| (0..m.g).map(|k| PatternFactor::new(pat, m, k)).collect())
            .collect::<Vec<Result<Vec<_>>>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let log_k_lambda = (0..m.g)
            .map(|k| log_bessel_k(m.lambda[k], m.omega[k]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            by_pattern,
            log_k_lambda,
            log_pi: m.pi.iter().map(|v| v.ln()).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    g: usize,
    p: usize,
    q: usize,
    factors: bool,
    block: usize,
    stride: usize,
}

impl Layout {
    fn new(g: usize, p: usize, q: usize, factors: bool) -> Self {
        let mut block = 2 * p + p * p;
        if factors {
            block += 2 * q + q * q + q * p;
        }
        Self {
            g,
            p,
            q,
            factors,
            block,
            stride: 5 * g + g * block,
        }
    }

    fn comp(&self, k: usize) -> usize {
        5 * self.g + k * self.block
    }

    fn e1(&self, k: usize) -> usize {
        self.comp(k)
    }

    fn e2(&self, k: usize) -> usize {
        self.comp(k) + self.p
    }

    fn e3(&self, k: usize) -> usize {
        self.comp(k) + 2 * self.p
    }

    fn e4(&self, k: usize) -> usize {
        self.comp(k) + 2 * self.p + self.p * self.p
    }

    fn e5(&self, k: usize) -> usize {
        self.e4(k) + self.q
    }

    fn e6(&self, k: usize) -> usize {
        self.e5(k) + self.q
    }

    fn e7(&self, k: usize) -> usize {
        self.e6(k) + self.q * self.q
    }
}

/// Per-(row, component) conditional expectations. Matrices are stored
/// row-major: `E3` is `p × p`, `E6` is `q × q`, `E7` is `q × p`.
#[derive(Debug, Clone)]
pub struct EStepCache {
    n: usize,
    layout: Layout,
    data: Vec<f64>,
    row_loglik: Vec<f64>,
    loglik: f64,
}

const LOGD: usize = 0;
const ZHAT: usize = 1;
const A: usize = 2;
const B: usize = 3;
const C: usize = 4;

impl EStepCache {
    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn n_components(&self) -> usize {
        self.layout.g
    }

    pub fn has_factor_moments(&self) -> bool {
        self.layout.factors
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.layout.stride..(i + 1) * self.layout.stride]
    }

    fn scalar(&self, i: usize, slot: usize, k: usize) -> f64 {
        self.row(i)[slot * self.layout.g + k]
    }

    /// `log π_k + log f_k(x_i^o)`.
    pub fn log_weighted_density(&self, i: usize, k: usize) -> f64 {
        self.scalar(i, LOGD, k)
    }

    pub fn zhat(&self, i: usize, k: usize) -> f64 {
        self.scalar(i, ZHAT, k)
    }

    pub fn a(&self, i: usize, k: usize) -> f64 {
        self.scalar(i, A, k)
    }

    pub fn b(&self, i: usize, k: usize) -> f64 {
        self.scalar(i, B, k)
    }

    pub fn c(&self, i: usize, k: usize) -> f64 {
        self.scalar(i, C, k)
    }

    pub fn e1(&self, i: usize, k: usize) -> &[f64] {
        let o = self.layout.e1(k);
        &self.row(i)[o..o + self.layout.p]
    }

    pub fn e2(&self, i: usize, k: usize) -> &[f64] {
        let o = self.layout.e2(k);
        &self.row(i)[o..o + self.layout.p]
    }

    pub fn e3(&self, i: usize, k: usize) -> &[f64] {
        let o = self.layout.e3(k);
        &self.row(i)[o..o + self.layout.p * self.layout.p]
    }

    fn factor_slice(&self, i: usize, start: usize, len: usize) -> &[f64] {
        assert!(self.layout.factors, "cycle-one cache has no factor moments");
        &self.row(i)[start..start + len]
    }

    pub fn e4(&self, i: usize, k: usize) -> &[f64] {
        self.factor_slice(i, self.layout.e4(k), self.layout.q)
    }

    pub fn e5(&self, i: usize, k: usize) -> &[f64] {
        self.factor_slice(i, self.layout.e5(k), self.layout.q)
    }

    pub fn e6(&self, i: usize, k: usize) -> &[f64] {
        self.factor_slice(i, self.layout.e6(k), self.layout.q * self.layout.q)
    }

    pub fn e7(&self, i: usize, k: usize) -> &[f64] {
        self.factor_slice(i, self.layout.e7(k), self.layout.q * self.layout.p)
    }

    pub fn e3_matrix(&self, i: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.layout.p, self.layout.p, self.e3(i, k))
    }

    pub fn e6_matrix(&self, i: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.layout.q, self.layout.q, self.e6(i, k))
    }

    pub fn e7_matrix(&self, i: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.layout.q, self.layout.p, self.e7(i, k))
    }

    /// Observed-data log-likelihood at the parameters the cache was built
    /// from.
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn row_loglik(&self, i: usize) -> f64 {
        self.row_loglik[i]
    }

    /// `n × G` responsibilities.
    pub fn posterior(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.layout.g, |i, k| self.zhat(i, k))
    }
}

struct Scratch {
    d_o: Vec<f64>,
    pd: Vec<f64>,
    am: Vec<f64>,
    ad: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn component_row(
    d: &DataMatrix,
    i: usize,
    pat: &ObservedPattern,
    m: &MghfaModel,
    k: usize,
    f: &PatternFactor,
    fx: &Factors,
    lay: &Layout,
    out: &mut [f64],
    s: &mut Scratch,
) -> Result<()> {
    let o = &pat.observed_idx;
    let mi = &pat.missing_idx;
    let (po, pm, p, q) = (o.len(), mi.len(), lay.p, lay.q);
    let mu = &m.mu[k];
    let beta = &m.beta[k];
    s.d_o.clear();
    s.d_o.extend(o.iter().map(|&j| d.observed(i, j) - mu[j]));
    s.pd.clear();
    for r in 0..po {
        let mut acc = 0.0;
        for c in 0..po {
            acc += f.p_inv[(r, c)] * s.d_o[c];
        }
        s.pd.push(acc);
    }
    let delta: f64 = s.d_o.iter().zip(&s.pd).map(|(x, y)| x * y).sum();
    let kappa: f64 = s.d_o.iter().zip(f.p_beta.iter()).map(|(x, y)| x * y).sum();
    let post = GigParams::new(m.lambda[k] - po as f64 / 2.0, m.omega[k] + delta.max(0.0), m.omega[k] + f.rho.max(0.0))?;
    let (GigMoments { e_w: a, e_inv_w: b, e_log_w: c }, log_k_nu) = post.moments_with_log_k()?;
    let forms = GhdForms {
        delta: delta.max(0.0),
        rho: f.rho.max(0.0),
        kappa,
        log_det: f.log_det,
    };
    let logf = ghd_logpdf_with_log_k(po, m.lambda[k], m.omega[k], &forms, log_k_nu, fx.log_k_lambda[k])?;
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::domain("non-finite posterior GIG moments"));
    }
    let g = lay.g;
    out[LOGD * g + k] = fx.log_pi[k] + logf;
    out[A * g + k] = a;
    out[B * g + k] = b;
    out[C * g + k] = c;

    // A_m = μ_m + Σ_mo P d_o; B_m = β_m − Σ_mo P β_o.
    s.am.clear();
    for r in 0..pm {
        let mut acc = mu[mi[r]];
        for t in 0..po {
            acc += f.smo_p[(r, t)] * s.d_o[t];
        }
        s.am.push(acc);
    }
    let bm = &f.skew_m;

    let e1o = lay.e1(k);
    let e2o = lay.e2(k);
    let e3o = lay.e3(k);
    for &j in o.iter() {
        let x = d.observed(i, j);
        out[e1o + j] = x;
        out[e2o + j] = b * x;
    }
    for (r, &j) in mi.iter().enumerate() {
        out[e1o + j] = s.am[r] + a * bm[r];
        out[e2o + j] = b * s.am[r] + bm[r];
    }
    // E3 blocks.
    for &j1 in o.iter() {
        let x1 = d.observed(i, j1);
        for &j2 in o.iter() {
            let x2 = d.observed(i, j2);
            out[e3o + j1 * p + j2] = b * x1 * x2;
        }
        for &jm in mi.iter() {
            let v = out[e2o + jm] * x1;
            out[e3o + jm * p + j1] = v;
            out[e3o + j1 * p + jm] = v;
        }
    }
    for (r1, &j1) in mi.iter().enumerate() {
        for (r2, &j2) in mi.iter().enumerate() {
            out[e3o + j1 * p + j2] = f.cond_cov[(r1, r2)]
                + b * s.am[r1] * s.am[r2]
                + s.am[r1] * bm[r2]
                + bm[r1] * s.am[r2]
                + a * bm[r1] * bm[r2];
        }
    }

    if lay.factors {
        // αd and αβ
        s.ad.clear();
        for r in 0..q {
            let mut acc = 0.0;
            for t in 0..po {
                acc += f.alpha[(r, t)] * s.d_o[t];
            }
            s.ad.push(acc);
        }
        let ab = &f.alpha_beta;
        let e4o = lay.e4(k);
        let e5o = lay.e5(k);
        let e6o = lay.e6(k);
        let e7o = lay.e7(k);
        for r in 0..q {
            out[e4o + r] = s.ad[r] - a * ab[r];
            out[e5o + r] = b * s.ad[r] - ab[r];
        }
        for r in 0..q {
            for t in 0..q {
                let id = if r == t { 1.0 } else { 0.0 };
                out[e6o + r * q + t] = id - f.alpha_lambda[(r, t)] + b * s.ad[r] * s.ad[t]
                    - (s.ad[r] * ab[t] + ab[r] * s.ad[t])
                    + a * ab[r] * ab[t];
            }
        }
        let l = &m.loadings[k];
        for r in 0..q {
            let e5 = out[e5o + r];
            for (t, &j) in o.iter().enumerate() {
                out[e7o + r * p + j] = e5 * (s.d_o[t] + mu[j]);
            }
            let e4 = out[e4o + r];
            for &j in mi.iter() {
                let mut v = e5 * mu[j] + e4 * beta[j];
                for t in 0..q {
                    v += out[e6o + r * q + t] * l[(j, t)];
                }
                out[e7o + r * p + j] = v;
            }
        }
    }
    Ok(())
}

fn row_estep(
    d: &DataMatrix,
    i: usize,
    m: &MghfaModel,
    fx: &Factors,
    lay: &Layout,
    out: &mut [f64],
) -> Result<f64> {
    let pidx = d.patterns().index_of(i);
    let pat = d.pattern_of(i);
    let mut s = Scratch {
        d_o: Vec::with_capacity(lay.p),
        pd: Vec::with_capacity(lay.p),
        am: Vec::with_capacity(lay.p),
        ad: Vec::with_capacity(lay.q),
    };
    for k in 0..lay.g {
        component_row(d, i, pat, m, k, &fx.by_pattern[pidx][k], fx, lay, out, &mut s).map_err(|e| {
            Error::Numeric {
                row: i,
                component: k,
                message: e.to_string(),
            }
        })?;
    }
    let g = lay.g;
    let mx = (0..g).map(|k| out[LOGD * g + k]).fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return Err(Error::NonFiniteLikelihood { row: i });
    }
    let mut total = 0.0;
    for k in 0..g {
        let w = (out[LOGD * g + k] - mx).exp();
        out[ZHAT * g + k] = w;
        total += w;
    }
    for k in 0..g {
        out[ZHAT * g + k] /= total;
    }
    Ok(mx + total.ln())
}

/// Runs the E-step at `m`. With `factors` set, the latent-factor moments
/// `E4`–`E7` are filled in as well.
pub fn estep(d: &DataMatrix, m: &MghfaModel, factors: bool) -> Result<EStepCache> {
    if d.ncols() != m.p {
        return Err(Error::DimensionMismatch {
            expected: m.p,
            found: d.ncols(),
        });
    }
    let n = d.nrows();
    let lay = Layout::new(m.g, m.p, m.q, factors);
    let fx = Factors::new(d, m)?;
    let mut data = vec![0.0; n * lay.stride];
    let results: Vec<Result<f64>> = data
        .par_chunks_mut(lay.stride)
        .enumerate()
        .map(|(i, out)| row_estep(d, i, m, &fx, &lay, out))
        .collect();
    let mut row_loglik = Vec::with_capacity(n);
    for r in results {
        row_loglik.push(r?);
    }
    let loglik = row_loglik.iter().sum();
    Ok(EStepCache {
        n,
        layout: lay,
        data,
        row_loglik,
        loglik,
    })
}

/// Responsibilities and `a, b, c, E1, E2, E3`.
pub fn estep_cycle1(d: &DataMatrix, m: &MghfaModel) -> Result<EStepCache> {
    estep(d, m, false)
}

/// Everything from the first cycle plus `E4`–`E7`.
pub fn estep_cycle2(d: &DataMatrix, m: &MghfaModel) -> Result<EStepCache> {
    estep(d, m, true)
}
