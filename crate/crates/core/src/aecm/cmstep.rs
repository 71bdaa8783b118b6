//! Conditional maximization steps.

use nalgebra::{DMatrix, DVector};

use super::estep::EStepCache;
use super::FitConfig;
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::model::MghfaModel;
use crate::special::{bessel_k_ratio, dlogk_dorder, log_bessel_k};

pub const LAMBDA_BOUND: f64 = 50.0;
pub const OMEGA_MIN: f64 = 1e-6;
pub const OMEGA_MAX: f64 = 500.0;

/// `-log K_λ(ω) + (λ-1)c̄ - ω(ā+b̄)/2`.
pub fn q_lambda_omega(lambda: f64, omega: f64, a_bar: f64, b_bar: f64, c_bar: f64) -> Result<f64> {
    Ok(-log_bessel_k(lambda, omega)? + (lambda - 1.0) * c_bar - 0.5 * omega * (a_bar + b_bar))
}

fn dq_domega(lambda: f64, omega: f64, ab: f64) -> Result<f64> {
    // d/dω log K_λ(ω) = λ/ω − K_{λ+1}(ω)/K_λ(ω)
    Ok(bessel_k_ratio(lambda, omega)? - lambda / omega - 0.5 * ab)
}

/// Maximizes a unimodal `f` on `[lo, hi]`.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}

fn q_or_neg_inf(lambda: f64, omega: f64, a_bar: f64, b_bar: f64, c_bar: f64) -> f64 {
    q_lambda_omega(lambda, omega, a_bar, b_bar, c_bar)
        .ok()
        .filter(|v| v.is_finite())
        .unwrap_or(f64::NEG_INFINITY)
}

/// One fixed-point step `λ = c̄ λ_prev / ∂_λ log K_λ(ω_prev)`, kept only if it
/// raises `q`; otherwise a golden-section search over `[-50, 50]`.
pub fn update_lambda(lambda_prev: f64, omega_prev: f64, a_bar: f64, b_bar: f64, c_bar: f64) -> Result<f64> {
    let q = |l: f64| q_or_neg_inf(l, omega_prev, a_bar, b_bar, c_bar);
    let q0 = q(lambda_prev);
    let deriv = dlogk_dorder(lambda_prev, omega_prev)?;
    let step = (c_bar * lambda_prev / deriv).clamp(-LAMBDA_BOUND, LAMBDA_BOUND);
    if step.is_finite() && q(step) >= q0 {
        return Ok(step);
    }
    let best = golden_max(q, -LAMBDA_BOUND, LAMBDA_BOUND, 1e-9);
    Ok(if q(best) >= q0 { best } else { lambda_prev })
}

/// One Newton step on `q(λ, ·)` from `ω_prev`, kept only if it stays inside
/// `[1e-6, 500]` and raises `q`; otherwise a golden-section search in
/// `log ω` over that bracket.
pub fn update_omega(lambda: f64, omega_prev: f64, a_bar: f64, b_bar: f64, c_bar: f64) -> Result<f64> {
    let ab = a_bar + b_bar;
    let q = |w: f64| q_or_neg_inf(lambda, w, a_bar, b_bar, c_bar);
    let q0 = q(omega_prev);
    let g1 = dq_domega(lambda, omega_prev, ab)?;
    let h = 1e-4 * omega_prev;
    let g2 = (dq_domega(lambda, omega_prev + h, ab)? - dq_domega(lambda, omega_prev - h, ab)?) / (2.0 * h);
    if g2 < 0.0 && g1.is_finite() {
        let step = omega_prev - g1 / g2;
        if (OMEGA_MIN..=OMEGA_MAX).contains(&step) && q(step) >= q0 {
            return Ok(step);
        }
    }
    let t = golden_max(|t| q(t.exp()), OMEGA_MIN.ln(), OMEGA_MAX.ln(), 1e-10);
    let best = t.exp().clamp(OMEGA_MIN, OMEGA_MAX);
    Ok(if q(best) >= q0 { best } else { omega_prev })
}

/// Responsibility-weighted sums for one component.
#[derive(Debug, Clone)]
pub struct ComponentSums {
    pub n: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e1: DVector<f64>,
    pub e2: DVector<f64>,
    pub e3_diag: DVector<f64>,
    pub e4: DVector<f64>,
    pub e5: DVector<f64>,
    pub e6: DMatrix<f64>,
    pub e7: DMatrix<f64>,
}

impl ComponentSums {
    /// Accumulates in row order so results do not depend on scheduling.
    pub fn collect(cache: &EStepCache, k: usize, p: usize, q: usize) -> Self {
        let factors = cache.has_factor_moments();
        let mut s = Self {
            n: 0.0,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            e1: DVector::zeros(p),
            e2: DVector::zeros(p),
            e3_diag: DVector::zeros(p),
            e4: DVector::zeros(q),
            e5: DVector::zeros(q),
            e6: DMatrix::zeros(q, q),
            e7: DMatrix::zeros(q, p),
        };
        for i in 0..cache.nrows() {
            let z = cache.zhat(i, k);
            s.n += z;
            s.a += z * cache.a(i, k);
            s.b += z * cache.b(i, k);
            s.c += z * cache.c(i, k);
            let (e1, e2, e3) = (cache.e1(i, k), cache.e2(i, k), cache.e3(i, k));
            for j in 0..p {
                s.e1[j] += z * e1[j];
                s.e2[j] += z * e2[j];
                s.e3_diag[j] += z * e3[j * p + j];
            }
            if factors {
                let (e4, e5, e6, e7) = (cache.e4(i, k), cache.e5(i, k), cache.e6(i, k), cache.e7(i, k));
                for r in 0..q {
                    s.e4[r] += z * e4[r];
                    s.e5[r] += z * e5[r];
                    for t in 0..q {
                        s.e6[(r, t)] += z * e6[r * q + t];
                    }
                    for j in 0..p {
                        s.e7[(r, j)] += z * e7[r * p + j];
                    }
                }
            }
        }
        s
    }
}

fn check_mass(n: f64, k: usize, cfg: &FitConfig, iteration: usize) -> Result<()> {
    if !(n >= cfg.min_component_mass) {
        return Err(Error::DegenerateComponent {
            component: k,
            iteration,
            mass: n,
        });
    }
    Ok(())
}

/// Updates `π, μ, β, λ, ω` from a cycle-one cache.
pub fn cmstep_cycle1(cache: &EStepCache, m: &MghfaModel, cfg: &FitConfig, iteration: usize) -> Result<MghfaModel> {
    let mut out = m.clone();
    let n = cache.nrows() as f64;
    for k in 0..m.g {
        let s = ComponentSums::collect(cache, k, m.p, 0);
        check_mass(s.n, k, cfg, iteration)?;
        let a_bar = s.a / s.n;
        let b_bar = s.b / s.n;
        let c_bar = s.c / s.n;
        let den = a_bar * s.b - s.n;
        if !(den.abs() > 1e-12 * s.n) {
            return Err(Error::SingularUpdate {
                component: k,
                message: format!("location/skewness denominator {den:e}"),
            });
        }
        out.pi[k] = s.n / n;
        out.mu[k] = (&s.e2 * a_bar - &s.e1) / den;
        out.beta[k] = (&s.e1 * b_bar - &s.e2) / den;
        let lambda = update_lambda(m.lambda[k], m.omega[k], a_bar, b_bar, c_bar)?;
        out.lambda[k] = lambda;
        out.omega[k] = update_omega(lambda, m.omega[k], a_bar, b_bar, c_bar)?;
    }
    let total: f64 = out.pi.iter().sum();
    out.pi.iter_mut().for_each(|v| *v /= total);
    out.validate()?;
    Ok(out)
}

/// Updates `Λ, Ψ` from a cycle-two cache built at the cycle-one parameters.
pub fn cmstep_cycle2(cache: &EStepCache, m: &MghfaModel, cfg: &FitConfig, iteration: usize) -> Result<MghfaModel> {
    if !cache.has_factor_moments() {
        return Err(Error::invalid("cache", "cycle-two update needs factor moments"));
    }
    let mut out = m.clone();
    let (p, q) = (m.p, m.q);
    for k in 0..m.g {
        let s = ComponentSums::collect(cache, k, p, q);
        check_mass(s.n, k, cfg, iteration)?;
        let mu = &m.mu[k];
        let beta = &m.beta[k];
        let num = s.e7.transpose() - mu * s.e5.transpose() - beta * s.e4.transpose();
        let lambda_new = if q == 0 {
            DMatrix::zeros(p, 0)
        } else {
            let e6 = (&s.e6 + s.e6.transpose()) * 0.5;
            let chol = cholesky(&e6, "summed E6").or_else(|_| {
                let ridge = 1e-8 * e6.trace().abs().max(f64::MIN_POSITIVE) / q as f64;
                let mut r = e6.clone();
                for j in 0..q {
                    r[(j, j)] += ridge;
                }
                cholesky(&r, "ridged E6")
            });
            let chol = chol.map_err(|_| Error::SingularUpdate {
                component: k,
                message: "summed factor second moment is singular".into(),
            })?;
            // Λ = N E6⁻¹  ⇔  E6 Λ' = N'
            chol.solve(&num.transpose()).transpose()
        };
        let l_e7 = &lambda_new * &s.e7;
        let l_e5 = &lambda_new * &s.e5;
        let l_e4 = &lambda_new * &s.e4;
        let l_e6_lt = &lambda_new * &s.e6 * lambda_new.transpose();
        let mut psi = DVector::zeros(p);
        for j in 0..p {
            let v = s.e3_diag[j] - 2.0 * s.e2[j] * mu[j] + s.b * mu[j] * mu[j]
                - 2.0 * beta[j] * (s.e1[j] - s.n * mu[j])
                + s.a * beta[j] * beta[j]
                - 2.0 * l_e7[(j, j)]
                + 2.0 * l_e5[j] * mu[j]
                + 2.0 * l_e4[j] * beta[j]
                + l_e6_lt[(j, j)];
            let v = v / s.n;
            psi[j] = if v.is_finite() { v.max(cfg.min_psi) } else { f64::NAN };
        }
        if psi.iter().any(|v| !v.is_finite()) || lambda_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularUpdate {
                component: k,
                message: "non-finite loading or uniqueness update".into(),
            });
        }
        out.loadings[k] = lambda_new;
        out.psi[k] = psi;
    }
    out.validate()?;
    Ok(out)
}
