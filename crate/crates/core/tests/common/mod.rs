#![allow(dead_code)]

use mghfa::{DataMatrix, GigParams, MghfaModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point
/// Gauss rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Globally adaptive Gauss–Kronrod integral over `[a, b]`: the interval
/// with the largest error estimate is bisected until the total estimated
/// error is below `rel · |∫|`, rounding level is reached, or 5000
/// intervals are in use.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    let pieces = 16;
    let w = (b - a) / pieces as f64;
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * w, a + (i + 1) as f64 * w);
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        let scale: f64 = parts.iter().map(|p| p.2.abs()).sum();
        if err <= rel * total.abs() || err <= 20.0 * f64::EPSILON * scale || parts.len() >= 5000 {
            return total;
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].3.total_cmp(&parts[j].3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let m = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, m);
        let (v2, e2) = gk15(&f, m, hi);
        parts.push((lo, m, v1, e1));
        parts.push((m, hi, v2, e2));
    }
}

/// `∫_0^∞ f(w) dw` through `w = e^s`. `log_f` is the log of the
/// integrand's positive envelope and is used to find where it is
/// negligible.
pub fn integrate_positive<F: Fn(f64) -> f64, L: Fn(f64) -> f64>(f: F, log_f: L, tol: f64) -> f64 {
    let g = |s: f64| log_f(s.exp()) + s;
    let mut peak = (f64::NEG_INFINITY, 0.0);
    let mut s = -40.0;
    while s <= 40.0 {
        let v = g(s);
        if v > peak.0 {
            peak = (v, s);
        }
        s += 0.01;
    }
    let cut = peak.0 - 50.0;
    let mut lo = peak.1;
    while lo > -60.0 && g(lo) > cut {
        lo -= 0.25;
    }
    let mut hi = peak.1;
    while hi < 60.0 && g(hi) > cut {
        hi += 0.25;
    }
    integrate(|s| f(s.exp()) * s.exp(), lo, hi, tol)
}

pub fn gig_expectation<F: Fn(f64) -> f64>(p: &GigParams, h: F) -> f64 {
    let lp = |w: f64| mghfa::gig_logpdf(w, p).unwrap();
    integrate_positive(|w| h(w) * lp(w).exp(), lp, 1e-13)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean and standard error of each coordinate of a stream of vectors.
pub struct Accumulator {
    n: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Accumulator {
    pub fn new(len: usize) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    pub fn push(&mut self, v: &[f64]) {
        self.n += 1;
        for (j, x) in v.iter().enumerate() {
            self.sum[j] += x;
            self.sum_sq[j] += x * x;
        }
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.sum[j] / self.n as f64
    }

    pub fn se(&self, j: usize) -> f64 {
        let n = self.n as f64;
        let m = self.mean(j);
        ((self.sum_sq[j] / n - m * m).max(0.0) / n).sqrt()
    }
}

/// Monte Carlo estimates of the conditional expectations of one row under
/// one component, with standard errors. Conditioning uses explicit
/// matrix inverses on the full joint law of `(U, X) | w`.
pub struct McMoments {
    /// a, b, c, E1 (p), E2 (p), E3 (p²), E4 (q), E5 (q), E6 (q²), E7 (qp)
    pub acc: Accumulator,
    pub p: usize,
    pub q: usize,
}

impl McMoments {
    pub fn a(&self) -> usize {
        0
    }
    pub fn b(&self) -> usize {
        1
    }
    pub fn c(&self) -> usize {
        2
    }
    pub fn e1(&self, j: usize) -> usize {
        3 + j
    }
    pub fn e2(&self, j: usize) -> usize {
        3 + self.p + j
    }
    pub fn e3(&self, r: usize, c: usize) -> usize {
        3 + 2 * self.p + r * self.p + c
    }
    pub fn e4(&self, r: usize) -> usize {
        3 + 2 * self.p + self.p * self.p + r
    }
    pub fn e5(&self, r: usize) -> usize {
        self.e4(0) + self.q + r
    }
    pub fn e6(&self, r: usize, c: usize) -> usize {
        self.e5(0) + self.q + r * self.q + c
    }
    pub fn e7(&self, r: usize, c: usize) -> usize {
        self.e6(0, 0) + self.q * self.q + r * self.p + c
    }
}

fn invert(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

/// Samples `W | x^o` from its GIG posterior, then `(U, X^m) | w, x^o` from
/// the conditional Gaussian, averaging the integrands of a, b, c and E1–E7.
pub fn mc_moments(x: &[f64], mask: &[bool], m: &MghfaModel, k: usize, draws: usize, seed: u64) -> McMoments {
    let (p, q) = (m.p, m.q);
    let o: Vec<usize> = (0..p).filter(|&j| mask[j]).collect();
    let mi: Vec<usize> = (0..p).filter(|&j| !mask[j]).collect();
    let lam = &m.loadings[k];
    let sigma = lam * lam.transpose() + DMatrix::from_diagonal(&m.psi[k]);
    let sub = |rows: &[usize], cols: &[usize], s: &DMatrix<f64>| {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| s[(rows[r], cols[c])])
    };
    let s_oo = sub(&o, &o, &sigma);
    let s_oo_inv = invert(&s_oo);
    let xo = DVector::from_iterator(o.len(), o.iter().map(|&j| x[j]));
    let mu_o = DVector::from_iterator(o.len(), o.iter().map(|&j| m.mu[k][j]));
    let beta_o = DVector::from_iterator(o.len(), o.iter().map(|&j| m.beta[k][j]));
    let d = &xo - &mu_o;
    let delta = (d.transpose() * &s_oo_inv * &d)[(0, 0)];
    let rho = (beta_o.transpose() * &s_oo_inv * &beta_o)[(0, 0)];
    let post = GigParams::new(m.lambda[k] - o.len() as f64 / 2.0, m.omega[k] + delta, m.omega[k] + rho).unwrap();
    let gig = mghfa::gig::Gig::new(post).unwrap();

    // Joint of Y = (U, X_m) and X_o given w, per unit w:
    //   Cov(Y) = [[I, Λ_m'], [Λ_m, Σ_mm]], Cov(Y, X_o) = [[Λ_o'], [Σ_mo]], Var(X_o) = Σ_oo.
    let nm = mi.len();
    let dim = q + nm;
    let mut c_yy = DMatrix::zeros(dim, dim);
    let mut c_yo = DMatrix::zeros(dim, o.len());
    for r in 0..q {
        c_yy[(r, r)] = 1.0;
        for (t, &j) in mi.iter().enumerate() {
            c_yy[(r, q + t)] = lam[(j, r)];
            c_yy[(q + t, r)] = lam[(j, r)];
        }
        for (t, &j) in o.iter().enumerate() {
            c_yo[(r, t)] = lam[(j, r)];
        }
    }
    for (t1, &j1) in mi.iter().enumerate() {
        for (t2, &j2) in mi.iter().enumerate() {
            c_yy[(q + t1, q + t2)] = sigma[(j1, j2)];
        }
        for (t2, &j2) in o.iter().enumerate() {
            c_yo[(q + t1, t2)] = sigma[(j1, j2)];
        }
    }
    let gain = &c_yo * &s_oo_inv;
    let cond = &c_yy - &gain * c_yo.transpose();
    let chol = nalgebra::Cholesky::new(cond.clone() + DMatrix::identity(dim, dim) * 1e-300)
        .map(|c| c.l())
        .unwrap_or_else(|| DMatrix::zeros(dim, dim));
    let mean_base = DVector::from_iterator(
        dim,
        (0..q).map(|_| 0.0).chain(mi.iter().map(|&j| m.mu[k][j])),
    );
    let skew = DVector::from_iterator(dim, (0..q).map(|_| 0.0).chain(mi.iter().map(|&j| m.beta[k][j])));
    let skew_o = &beta_o;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = 3 + 2 * p + p * p + 2 * q + q * q + q * p;
    let mut acc = Accumulator::new(len);
    let mut row = vec![0.0; len];
    let mut z = DVector::zeros(dim);
    let mut full = vec![0.0; p];
    for _ in 0..draws {
        let w: f64 = rand_distr::Distribution::sample(&gig, &mut rng);
        // E[Y | w, x_o] = mean_base + w·skew + gain (x_o − μ_o − w β_o)
        let resid = &d - skew_o * w;
        let mean = &mean_base + &skew * w + &gain * resid;
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let y = mean + (&chol * &z) * w.sqrt();
        for j in 0..p {
            full[j] = if mask[j] { x[j] } else { 0.0 };
        }
        for (t, &j) in mi.iter().enumerate() {
            full[j] = y[q + t];
        }
        let u = &y.as_slice()[..q];
        let (wi, lw) = (1.0 / w, w.ln());
        let mut at = 0;
        let mut put = |v: f64| {
            row[at] = v;
            at += 1;
        };
        put(w);
        put(wi);
        put(lw);
        for &v in &full {
            put(v);
        }
        for &v in &full {
            put(wi * v);
        }
        for &v1 in &full {
            for &v2 in &full {
                put(wi * v1 * v2);
            }
        }
        for &v in u {
            put(v);
        }
        for &v in u {
            put(wi * v);
        }
        for &v1 in u {
            for &v2 in u {
                put(wi * v1 * v2);
            }
        }
        for &v1 in u {
            for &v2 in &full {
                put(wi * v1 * v2);
            }
        }
        acc.push(&row);
    }
    McMoments { acc, p, q }
}

/// A random small model with one component.
pub fn random_model<R: Rng>(rng: &mut R, p: usize, q: usize) -> MghfaModel {
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let lambda = u(-2.0, 3.0);
    let omega = u(0.5, 4.0);
    let mu = DVector::from_fn(p, |_, _| u(-1.0, 1.0));
    let beta = DVector::from_fn(p, |_, _| u(-0.8, 0.8));
    let loadings = DMatrix::from_fn(p, q, |_, _| u(-1.0, 1.0));
    let psi = DVector::from_fn(p, |_, _| u(0.3, 1.5));
    MghfaModel {
        g: 1,
        p,
        q,
        pi: vec![1.0],
        lambda: vec![lambda],
        omega: vec![omega],
        mu: vec![mu],
        beta: vec![beta],
        loadings: vec![loadings],
        psi: vec![psi],
    }
}

/// A two-component toy model in `p` dimensions.
pub fn toy_two_component(p: usize, q: usize) -> MghfaModel {
    let mut r = rng(11);
    let mut a = random_model(&mut r, p, q);
    let b = random_model(&mut r, p, q);
    a.g = 2;
    a.pi = vec![0.4, 0.6];
    a.lambda.push(b.lambda[0]);
    a.omega.push(b.omega[0]);
    a.mu.push(b.mu[0].add_scalar(2.0));
    a.beta.push(b.beta[0].clone());
    a.loadings.push(b.loadings[0].clone());
    a.psi.push(b.psi[0].clone());
    a
}

/// Builds a data matrix from rows and masks; masked cells get `NaN`.
pub fn masked(rows: &[Vec<f64>], masks: &[Vec<bool>]) -> DataMatrix {
    let p = rows[0].len();
    let values: Vec<f64> = rows
        .iter()
        .zip(masks)
        .flat_map(|(r, m)| r.iter().zip(m).map(|(v, o)| if *o { *v } else { f64::NAN }).collect::<Vec<_>>())
        .collect();
    let mask: Vec<bool> = masks.iter().flatten().copied().collect();
    DataMatrix::new(rows.len(), p, values, mask, mghfa::data::default_names(p)).unwrap()
}
