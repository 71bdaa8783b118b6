//! Parameter set of a mixture of generalized hyperbolic factor analyzers.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ghd::GhdParams;

pub const FORMAT_VERSION: u32 = 1;

/// `G` components in `p` dimensions with `q` factors each. Component `g` has
/// dispersion `Σ_g = Λ_g Λ_g' + diag(ψ_g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MghfaModel {
    pub g: usize,
    pub p: usize,
    pub q: usize,
    pub pi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub omega: Vec<f64>,
    pub mu: Vec<DVector<f64>>,
    pub beta: Vec<DVector<f64>>,
    pub loadings: Vec<DMatrix<f64>>,
    pub psi: Vec<DVector<f64>>,
}

impl MghfaModel {
    pub fn validate(&self) -> Result<()> {
        let (g, p, q) = (self.g, self.p, self.q);
        if g == 0 || p == 0 {
            return Err(Error::invalid("model", "G and p must be positive"));
        }
        for (name, len) in [
            ("pi", self.pi.len()),
            ("lambda", self.lambda.len()),
            ("omega", self.omega.len()),
            ("mu", self.mu.len()),
            ("beta", self.beta.len()),
            ("loadings", self.loadings.len()),
            ("psi", self.psi.len()),
        ] {
            if len != g {
                return Err(Error::invalid(name, format!("expected {g} components, found {len}")));
            }
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.pi.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("pi", "mixing proportions must be positive and sum to 1"));
        }
        for k in 0..g {
            if !self.lambda[k].is_finite() {
                return Err(Error::invalid("lambda", "must be finite"));
            }
            if !(self.omega[k] > 0.0 && self.omega[k].is_finite()) {
                return Err(Error::invalid("omega", "must be positive"));
            }
            if self.mu[k].len() != p || self.beta[k].len() != p || self.psi[k].len() != p {
                return Err(Error::invalid("mu/beta/psi", format!("component {k} has wrong length")));
            }
            if self.loadings[k].shape() != (p, q) {
                return Err(Error::invalid("loadings", format!("component {k} is not {p}x{q}")));
            }
            if self.psi[k].iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::invalid("psi", format!("component {k} has a non-positive entry")));
            }
            let finite = self.mu[k].iter().chain(self.beta[k].iter()).chain(self.loadings[k].iter());
            if finite.into_iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("model", format!("component {k} has non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self, k: usize) -> DMatrix<f64> {
        let l = &self.loadings[k];
        let mut s = l * l.transpose();
        for j in 0..self.p {
            s[(j, j)] += self.psi[k][j];
        }
        s
    }

    pub fn ghd_params(&self, k: usize) -> Result<GhdParams> {
        GhdParams::new(
            self.lambda[k],
            self.omega[k],
            self.mu[k].clone(),
            self.sigma(k),
            self.beta[k].clone(),
        )
    }

    /// Reorders components so that new component `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |v: &[f64]| perm.iter().map(|&k| v[k]).collect::<Vec<_>>();
        Self {
            g: self.g,
            p: self.p,
            q: self.q,
            pi: pick(&self.pi),
            lambda: pick(&self.lambda),
            omega: pick(&self.omega),
            mu: perm.iter().map(|&k| self.mu[k].clone()).collect(),
            beta: perm.iter().map(|&k| self.beta[k].clone()).collect(),
            loadings: perm.iter().map(|&k| self.loadings[k].clone()).collect(),
            psi: perm.iter().map(|&k| self.psi[k].clone()).collect(),
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format_version: FORMAT_VERSION,
            g: self.g,
            p: self.p,
            q: self.q,
            pi: self.pi.clone(),
            lambda: self.lambda.clone(),
            omega: self.omega.clone(),
            mu: self.mu.iter().map(|v| v.iter().copied().collect()).collect(),
            beta: self.beta.iter().map(|v| v.iter().copied().collect()).collect(),
            loadings: self
                .loadings
                .iter()
                .map(|l| {
                    let mut out = Vec::with_capacity(self.p * self.q);
                    for i in 0..self.p {
                        out.extend(l.row(i).iter().copied());
                    }
                    out
                })
                .collect(),
            psi: self.psi.iter().map(|v| v.iter().copied().collect()).collect(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::invalid(
                "format_version",
                format!("unsupported version {}", doc.format_version),
            ));
        }
        let (p, q) = (doc.p, doc.q);
        for l in &doc.loadings {
            if l.len() != p * q {
                return Err(Error::invalid("loadings", format!("expected {} entries", p * q)));
            }
        }
        let m = Self {
            g: doc.g,
            p,
            q,
            pi: doc.pi.clone(),
            lambda: doc.lambda.clone(),
            omega: doc.omega.clone(),
            mu: doc.mu.iter().map(|v| DVector::from_vec(v.clone())).collect(),
            beta: doc.beta.iter().map(|v| DVector::from_vec(v.clone())).collect(),
            loadings: doc
                .loadings
                .iter()
                .map(|l| DMatrix::from_row_slice(p, q, l))
                .collect(),
            psi: doc.psi.iter().map(|v| DVector::from_vec(v.clone())).collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        crate::data::write_json(path, &self.to_document())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&s)
    }
}

/// Serialized form; loadings are stored row-major per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    #[serde(rename = "G")]
    pub g: usize,
    pub p: usize,
    pub q: usize,
    pub pi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub omega: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub loadings: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}
