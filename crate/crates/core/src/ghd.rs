//! Multivariate generalized hyperbolic distribution in the `(λ, ω, μ, Σ, β)`
//! form with unit GIG scale.
//!
//! `X = μ + Wβ + √W U` with `W ~ I(λ, 1, ω)` and `U ~ N(0, Σ)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gig::{Gig, GigParams};
use crate::linalg::{chol_log_det, cholesky};
use crate::special::log_bessel_k;

#[derive(Debug, Clone, PartialEq)]
pub struct GhdParams {
    pub lambda: f64,
    pub omega: f64,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub beta: DVector<f64>,
}

impl GhdParams {
    pub fn new(
        lambda: f64,
        omega: f64,
        mu: DVector<f64>,
        sigma: DMatrix<f64>,
        beta: DVector<f64>,
    ) -> Result<Self> {
        let p = mu.len();
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: sigma.nrows(),
            });
        }
        if beta.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: beta.len(),
            });
        }
        if !lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be finite"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid("omega", format!("must be positive, got {omega}")));
        }
        cholesky(&sigma, "sigma")?;
        Ok(Self {
            lambda,
            omega,
            mu,
            sigma,
            beta,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Parameters of the marginal law of the coordinates in `idx`.
    pub fn marginal(&self, idx: &[usize]) -> Result<Self> {
        let mu = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mu[i]));
        let beta = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.beta[i]));
        let sigma = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.sigma[(idx[r], idx[c])]);
        Self::new(self.lambda, self.omega, mu, sigma, beta)
    }
}

/// `(x-μ)'Σ⁻¹(x-μ)`.
pub fn mahalanobis_sq(x: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if x.len() != mu.len() || sigma.nrows() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: x.len(),
        });
    }
    let c = cholesky(sigma, "sigma")?;
    let d = x - mu;
    let mut y = d.clone();
    c.l_dirty().solve_lower_triangular_mut(&mut y);
    Ok(y.norm_squared())
}

/// Sufficient quadratic forms of one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhdForms {
    /// `(x-μ)'Σ⁻¹(x-μ)`
    pub delta: f64,
    /// `β'Σ⁻¹β`
    pub rho: f64,
    /// `(x-μ)'Σ⁻¹β`
    pub kappa: f64,
    /// `log|Σ|`
    pub log_det: f64,
}

/// GHD log-density in `dim` dimensions from precomputed quadratic forms.
/// `log_k_lambda` is `log K_λ(ω)` and may be shared across rows.
pub fn ghd_logpdf_forms(
    dim: usize,
    lambda: f64,
    omega: f64,
    forms: &GhdForms,
    log_k_lambda: f64,
) -> Result<f64> {
    let nu = lambda - dim as f64 / 2.0;
    let z = ((omega + forms.delta) * (omega + forms.rho)).sqrt();
    let log_k_nu = log_bessel_k(nu, z)?;
    ghd_logpdf_with_log_k(dim, lambda, omega, forms, log_k_nu, log_k_lambda)
}

/// As [`ghd_logpdf_forms`] with `log K_{λ-dim/2}(√((ω+δ)(ω+ρ)))` supplied by
/// the caller.
pub fn ghd_logpdf_with_log_k(
    dim: usize,
    lambda: f64,
    omega: f64,
    forms: &GhdForms,
    log_k_nu: f64,
    log_k_lambda: f64,
) -> Result<f64> {
    let nu = lambda - dim as f64 / 2.0;
    let a = omega + forms.delta;
    let b = omega + forms.rho;
    let v = 0.5 * nu * (a.ln() - b.ln()) + log_k_nu + forms.kappa
        - 0.5 * dim as f64 * (2.0 * PI).ln()
        - 0.5 * forms.log_det
        - log_k_lambda;
    if !v.is_finite() {
        return Err(Error::domain(format!(
            "non-finite GHD log-density (dim {dim}, λ {lambda}, ω {omega}, δ {}, ρ {}, κ {})",
            forms.delta, forms.rho, forms.kappa
        )));
    }
    Ok(v)
}

pub fn ghd_logpdf(x: &DVector<f64>, p: &GhdParams) -> Result<f64> {
    let dim = p.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.len(),
        });
    }
    let c = cholesky(&p.sigma, "sigma")?;
    let l = c.l_dirty();
    let mut yd = x - &p.mu;
    l.solve_lower_triangular_mut(&mut yd);
    let mut yb = p.beta.clone();
    l.solve_lower_triangular_mut(&mut yb);
    let forms = GhdForms {
        delta: yd.norm_squared(),
        rho: yb.norm_squared(),
        kappa: yd.dot(&yb),
        log_det: chol_log_det(&c),
    };
    ghd_logpdf_forms(dim, p.lambda, p.omega, &forms, log_bessel_k(p.lambda, p.omega)?)
}

/// Draws `n` rows as an `n × p` matrix.
pub fn ghd_sample<R: Rng + ?Sized>(p: &GhdParams, rng: &mut R, n: usize) -> Result<DMatrix<f64>> {
    let dim = p.dim();
    let gig = Gig::new(GigParams::new(p.lambda, p.omega, p.omega)?)?;
    let c = cholesky(&p.sigma, "sigma")?;
    let l = c.l();
    let mut out = DMatrix::zeros(n, dim);
    let mut z = DVector::zeros(dim);
    for i in 0..n {
        let w = gig.sample(rng);
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let u = &l * &z;
        let sw = w.sqrt();
        for j in 0..dim {
            out[(i, j)] = p.mu[j] + w * p.beta[j] + sw * u[j];
        }
    }
    Ok(out)
}
