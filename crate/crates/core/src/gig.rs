//! Generalized inverse Gaussian distribution.
//!
//! Density on `w > 0`:
//!
//! ```text
//! f(w; λ, χ, ψ) = (ψ/χ)^{λ/2} w^{λ-1} / (2 K_λ(√(ψχ))) · exp{-(ψw + χ/w)/2}
//! ```
//!
//! with the scale/concentration form `η = √(χ/ψ)`, `ω = √(ψχ)`.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{dlogk_dorder, log_bessel_k_scaled, log_bessel_k_scaled_triple};

/// `GIG(λ, χ, ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GigParams {
    pub lambda: f64,
    pub chi: f64,
    pub psi: f64,
}

/// `I(λ, η, ω)`: the same law in scale/concentration form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GigAltParams {
    pub lambda: f64,
    pub eta: f64,
    pub omega: f64,
}

/// `E[W]`, `E[1/W]` and `E[log W]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigMoments {
    pub e_w: f64,
    pub e_inv_w: f64,
    pub e_log_w: f64,
}

impl GigParams {
    pub fn new(lambda: f64, chi: f64, psi: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::invalid("lambda", format!("must be finite, got {lambda}")));
        }
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::invalid("chi", format!("must be positive, got {chi}")));
        }
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(Error::invalid("psi", format!("must be positive, got {psi}")));
        }
        Ok(Self { lambda, chi, psi })
    }

    pub fn omega(&self) -> f64 {
        (self.psi * self.chi).sqrt()
    }

    pub fn eta(&self) -> f64 {
        (self.chi / self.psi).sqrt()
    }

    pub fn to_alt(&self) -> GigAltParams {
        GigAltParams {
            lambda: self.lambda,
            eta: self.eta(),
            omega: self.omega(),
        }
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.lambda, self.chi, self.psi).map(|_| ())
    }

    /// Moments together with `log K_λ(ω)`, which the mixture density shares.
    pub fn moments_with_log_k(&self) -> Result<(GigMoments, f64)> {
        self.validate()?;
        let omega = self.omega();
        let eta = self.eta();
        let l = self.lambda;
        let [lk_down, lk, lk_up] = log_bessel_k_scaled_triple(l, omega)?;
        let e_w = eta * (lk_up - lk).exp();
        // √(ψ/χ)·K_{λ+1}/K_λ − 2λ/χ rewritten through the three-term
        // recurrence as K_{λ−1}/(η K_λ); no subtraction.
        let e_inv_w = (lk_down - lk).exp() / eta;
        let e_log_w = eta.ln() + dlogk_dorder(l, omega)?;
        Ok((
            GigMoments {
                e_w,
                e_inv_w,
                e_log_w,
            },
            lk - omega,
        ))
    }
}

impl GigAltParams {
    pub fn new(lambda: f64, eta: f64, omega: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::invalid("lambda", format!("must be finite, got {lambda}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid("omega", format!("must be positive, got {omega}")));
        }
        Ok(Self { lambda, eta, omega })
    }

    pub fn to_standard(&self) -> GigParams {
        GigParams {
            lambda: self.lambda,
            chi: self.omega * self.eta,
            psi: self.omega / self.eta,
        }
    }

    /// Log density in the scale/concentration form.
    pub fn logpdf(&self, w: f64) -> Result<f64> {
        if !(w > 0.0) {
            return Err(Error::domain(format!("GIG density needs w > 0, got {w}")));
        }
        let lk = log_bessel_k_scaled(self.lambda, self.omega)? - self.omega;
        let u = w / self.eta;
        Ok((self.lambda - 1.0) * u.ln()
            - (2.0 * self.eta).ln()
            - lk
            - 0.5 * self.omega * (u + 1.0 / u))
    }
}

impl From<GigAltParams> for GigParams {
    fn from(p: GigAltParams) -> Self {
        p.to_standard()
    }
}

pub fn gig_logpdf(w: f64, p: &GigParams) -> Result<f64> {
    p.validate()?;
    if !(w > 0.0) {
        return Err(Error::domain(format!("GIG density needs w > 0, got {w}")));
    }
    let omega = p.omega();
    let lk = log_bessel_k_scaled(p.lambda, omega)? - omega;
    Ok(0.5 * p.lambda * (p.psi / p.chi).ln() + (p.lambda - 1.0) * w.ln()
        - std::f64::consts::LN_2
        - lk
        - 0.5 * (p.psi * w + p.chi / w))
}

pub fn gig_moments(p: &GigParams) -> Result<GigMoments> {
    p.moments_with_log_k().map(|(m, _)| m)
}

/// Draw `n` variates.
pub fn gig_sample<R: Rng + ?Sized>(p: &GigParams, rng: &mut R, n: usize) -> Result<Vec<f64>> {
    let sampler = Gig::new(*p)?;
    Ok((0..n).map(|_| sampler.sample(rng)).collect())
}

/// GIG sampler after Hörmann & Leydold (2014): ratio-of-uniforms with or
/// without mode shift, and a piecewise-constant hat for the region where
/// the density is not T-concave. Works on the standardized density
/// `x^{λ-1} exp{-ω(x + 1/x)/2}` with `λ ≥ 0`; negative orders are handled by
/// inversion and the result is rescaled by `η`.
#[derive(Debug, Clone, Copy)]
pub struct Gig {
    invert: bool,
    eta: f64,
    lambda: f64,
    omega: f64,
    method: Method,
}

#[derive(Debug, Clone, Copy)]
enum Method {
    RouShift {
        t: f64,
        s: f64,
        xm: f64,
        nc: f64,
        u_plus: f64,
        u_minus: f64,
    },
    RouNoShift {
        t: f64,
        s: f64,
        nc: f64,
        um: f64,
    },
    ConstantHat {
        x0: f64,
        k0: f64,
        k1: f64,
        k2: f64,
        a: [f64; 3],
    },
}

fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

impl Gig {
    pub fn new(p: GigParams) -> Result<Self> {
        p.validate()?;
        let invert = p.lambda < 0.0;
        let lambda = p.lambda.abs();
        let omega = p.omega();
        let eta = p.eta();

        let method = if lambda > 2.0 || omega > 3.0 {
            let t = 0.5 * (lambda - 1.0);
            let s = 0.25 * omega;
            let xm = gig_mode(lambda, omega);
            let nc = t * xm.ln() - s * (xm + 1.0 / xm);
            // Extremes of (x − xm)·sqrt(f(x)) are roots of a depressed cubic.
            let a = -(2.0 * (lambda + 1.0) / omega + xm);
            let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
            let c = xm;
            let pp = b - a * a / 3.0;
            let qq = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
            let fi = (-qq / (2.0 * (-pp * pp * pp / 27.0).sqrt())).clamp(-1.0, 1.0).acos();
            let fak = 2.0 * (-pp / 3.0).sqrt();
            let y1 = fak * (fi / 3.0).cos() - a / 3.0;
            let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
            let u_plus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
            let u_minus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
            Method::RouShift {
                t,
                s,
                xm,
                nc,
                u_plus,
                u_minus,
            }
        } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
            let t = 0.5 * (lambda - 1.0);
            let s = 0.25 * omega;
            let xm = gig_mode(lambda, omega);
            let nc = t * xm.ln() - s * (xm + 1.0 / xm);
            let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt())
                / omega;
            let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
            Method::RouNoShift { t, s, nc, um }
        } else {
            let xm = gig_mode(lambda, omega);
            let x0 = omega / (1.0 - lambda);
            let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
            let a0 = k0 * x0;
            let (k1, a1, k2, a2);
            if x0 >= 2.0 / omega {
                k1 = 0.0;
                a1 = 0.0;
                k2 = x0.powf(lambda - 1.0);
                a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
            } else {
                k1 = (-omega).exp();
                a1 = if lambda == 0.0 {
                    k1 * (2.0 / (omega * omega)).ln()
                } else {
                    k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
                };
                k2 = (2.0 / omega).powf(lambda - 1.0);
                a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
            }
            Method::ConstantHat {
                x0,
                k0,
                k1,
                k2,
                a: [a0, a1, a2],
            }
        };
        Ok(Self {
            invert,
            eta,
            lambda,
            omega,
            method,
        })
    }

    fn standardized<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lambda, omega) = (self.lambda, self.omega);
        match self.method {
            Method::RouShift {
                t,
                s,
                xm,
                nc,
                u_plus,
                u_minus,
            } => loop {
                let u = u_minus + rng.random::<f64>() * (u_plus - u_minus);
                let v: f64 = rng.random();
                let x = u / v + xm;
                if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
                    return x;
                }
            },
            Method::RouNoShift { t, s, nc, um } => loop {
                let u = um * rng.random::<f64>();
                let v: f64 = rng.random();
                let x = u / v;
                if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
                    return x;
                }
            },
            Method::ConstantHat { x0, k0, k1, k2, a } => loop {
                let total = a[0] + a[1] + a[2];
                let mut v = total * rng.random::<f64>();
                let (x, hx);
                if v <= a[0] {
                    x = x0 * v / a[0];
                    hx = k0;
                } else {
                    v -= a[0];
                    if v <= a[1] {
                        if lambda == 0.0 {
                            x = omega * (omega.exp() * v).exp();
                            hx = k1 / x;
                        } else {
                            x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                            hx = k1 * x.powf(lambda - 1.0);
                        }
                    } else {
                        v -= a[1];
                        let lo = x0.max(2.0 / omega);
                        x = -2.0 / omega
                            * ((-omega / 2.0 * lo).exp() - omega / (2.0 * k2) * v).ln();
                        hx = k2 * (-omega / 2.0 * x).exp();
                    }
                }
                let u = rng.random::<f64>() * hx;
                if x > 0.0
                    && x.is_finite()
                    && u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x)
                {
                    return x;
                }
            },
        }
    }
}

impl Distribution<f64> for Gig {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.standardized(rng);
        if self.invert {
            self.eta / x
        } else {
            self.eta * x
        }
    }
}
