//! Two-cycle AECM estimation for incomplete data.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::evaluation::{awe, bic, n_free_params};
use crate::init::{init_params, InitConfig};
use crate::model::MghfaModel;

pub mod cmstep;
pub mod estep;

pub use cmstep::{cmstep_cycle1, cmstep_cycle2, q_lambda_omega, update_lambda, update_omega, ComponentSums};
pub use estep::{estep_cycle1, estep_cycle2, EStepCache};

/// Which likelihood the Aitken limit is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AitkenVariant {
    /// `l∞ − l^(k+1)`
    #[default]
    Newest,
    /// `l∞ − l^(k)`
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub g: usize,
    pub q: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    pub min_psi: f64,
    pub min_component_mass: f64,
    pub seed: u64,
    pub aitken: AitkenVariant,
    pub init: InitConfig,
}

impl FitConfig {
    pub fn new(g: usize, q: usize) -> Self {
        Self {
            g,
            q,
            epsilon: 1e-5,
            max_iter: 1000,
            min_psi: 1e-10,
            min_component_mass: 2.0,
            seed: 0,
            aitken: AitkenVariant::Newest,
            init: InitConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.init.seed = seed;
        self
    }

    /// Checks the configuration against an `n × p` data set.
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if !(self.min_psi > 0.0) {
            return Err(Error::invalid("min_psi", "must be positive"));
        }
        if self.g == 0 || n <= self.g {
            return Err(Error::invalid("G", format!("need 1 <= G < n, got G = {}, n = {n}", self.g)));
        }
        check_factor_count(p, self.q)?;
        self.init.validate()
    }
}

/// `q` must satisfy `1 <= q < p` and `(p-q)² >= p+q`.
pub fn check_factor_count(p: usize, q: usize) -> Result<()> {
    if q == 0 || q >= p {
        return Err(Error::invalid("q", format!("need 1 <= q < p = {p}, got {q}")));
    }
    let (pf, qf) = (p as f64, q as f64);
    if (pf - qf).powi(2) < pf + qf {
        return Err(Error::invalid(
            "q",
            format!("{q} factors are not identifiable in {p} dimensions: (p-q)^2 < p+q"),
        ));
    }
    Ok(())
}

/// Largest admissible factor count for `p` variables.
pub fn max_factors(p: usize) -> usize {
    (1..p).rev().find(|&q| check_factor_count(p, q).is_ok()).unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: MghfaModel,
    /// `n × G` posterior membership probabilities.
    pub posterior: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub imputed: DataMatrix,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_params: usize,
    pub bic: f64,
    pub awe: f64,
    /// Wall-clock seconds of the two cycles of each iteration.
    pub cycle_seconds: Vec<[f64; 2]>,
}

impl FitResult {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// Aitken-extrapolated limit of `l0, l1, l2`, or `None` when the
/// acceleration denominator vanishes.
pub fn aitken_limit(l0: f64, l1: f64, l2: f64) -> Option<f64> {
    let d1 = l1 - l0;
    let d2 = l2 - l1;
    let scale = l0.abs().max(l1.abs()).max(l2.abs()).max(1.0);
    let tiny = 4.0 * f64::EPSILON * scale;
    if d1.abs() <= tiny || (d1 - d2).abs() <= tiny {
        return None;
    }
    let a = d2 / d1;
    Some(l1 + d2 / (1.0 - a))
}

/// Stopping rule on the last three log-likelihoods.
pub fn aitken_stop(trace: &[f64; 3], epsilon: f64, variant: AitkenVariant) -> bool {
    let [l0, l1, l2] = *trace;
    match aitken_limit(l0, l1, l2) {
        None => l2 - l1 < epsilon,
        Some(linf) => {
            let reference = match variant {
                AitkenVariant::Newest => l2,
                AitkenVariant::Paper => l1,
            };
            let diff = linf - reference;
            (0.0..epsilon).contains(&diff)
        }
    }
}

/// Observed-data log-likelihood.
pub fn observed_loglik(d: &DataMatrix, m: &MghfaModel) -> Result<f64> {
    m.validate()?;
    let cache = estep_cycle1(d, m)?;
    let l = cache.loglik();
    if !l.is_finite() {
        let row = (0..d.nrows()).find(|&i| !cache.row_loglik(i).is_finite()).unwrap_or(0);
        return Err(Error::NonFiniteLikelihood { row });
    }
    Ok(l)
}

/// MAP label of each row; ties go to the lowest component index.
pub fn map_labels(posterior: &DMatrix<f64>) -> Vec<usize> {
    (0..posterior.nrows())
        .map(|i| {
            let mut best = 0;
            for k in 1..posterior.ncols() {
                if posterior[(i, k)] > posterior[(i, best)] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Posterior membership probabilities and MAP labels.
pub fn classify(d: &DataMatrix, m: &MghfaModel) -> Result<(DMatrix<f64>, Vec<usize>)> {
    m.validate()?;
    let cache = estep_cycle1(d, m)?;
    let post = cache.posterior();
    let labels = map_labels(&post);
    Ok((post, labels))
}

/// Conditional-mean imputation: each missing cell becomes
/// `Σ_g ẑ*_ig E[X_ij | x_i^o, z_ig = 1]`. Observed cells are untouched.
pub fn impute(d: &DataMatrix, m: &MghfaModel, posterior: &DMatrix<f64>, cache: &EStepCache) -> Result<DataMatrix> {
    if posterior.shape() != (d.nrows(), m.g) || cache.nrows() != d.nrows() || cache.n_components() != m.g {
        return Err(Error::DimensionMismatch {
            expected: d.nrows(),
            found: cache.nrows(),
        });
    }
    d.filled(|i, j| (0..m.g).map(|k| posterior[(i, k)] * cache.e1(i, k)[j]).sum())
}

/// Initializes from `cfg` and runs [`fit_from`].
pub fn fit(d: &DataMatrix, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate(d.nrows(), d.ncols())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = init_params(d, cfg.g, cfg.q, &cfg.init, &mut rng)?;
    fit_from(d, cfg, start)
}

fn tag_iteration(e: Error, iteration: usize) -> Error {
    match e {
        Error::DegenerateComponent { component, mass, .. } => Error::DegenerateComponent {
            component,
            iteration,
            mass,
        },
        e @ (Error::FitFailed { .. } | Error::InvalidParameter { .. } | Error::DimensionMismatch { .. }) => e,
        other => Error::FitFailed {
            iteration,
            message: other.to_string(),
        },
    }
}

/// Runs AECM iterations from the given starting model.
pub fn fit_from(d: &DataMatrix, cfg: &FitConfig, start: MghfaModel) -> Result<FitResult> {
    cfg.validate(d.nrows(), d.ncols())?;
    start.validate()?;
    if start.g != cfg.g || start.q != cfg.q || start.p != d.ncols() {
        return Err(Error::invalid("start", "starting model does not match the configuration"));
    }
    let mut model = start;
    let mut t = Instant::now();
    let mut cache = estep_cycle1(d, &model).map_err(|e| tag_iteration(e, 0))?;
    let mut e1_seconds = t.elapsed().as_secs_f64();
    let mut trace = vec![cache.loglik()];
    let mut cycle_seconds = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let it = iterations + 1;
        t = Instant::now();
        let m1 = cmstep_cycle1(&cache, &model, cfg, it).map_err(|e| tag_iteration(e, it))?;
        let c1 = e1_seconds + t.elapsed().as_secs_f64();
        t = Instant::now();
        let cache2 = estep_cycle2(d, &m1).map_err(|e| tag_iteration(e, it))?;
        let m2 = cmstep_cycle2(&cache2, &m1, cfg, it).map_err(|e| tag_iteration(e, it))?;
        let c2 = t.elapsed().as_secs_f64();
        drop(cache2);
        t = Instant::now();
        cache = estep_cycle1(d, &m2).map_err(|e| tag_iteration(e, it))?;
        e1_seconds = t.elapsed().as_secs_f64();
        model = m2;
        iterations = it;
        trace.push(cache.loglik());
        cycle_seconds.push([c1, c2]);
        if !cache.loglik().is_finite() {
            return Err(Error::FitFailed {
                iteration: it,
                message: "non-finite log-likelihood".into(),
            });
        }
        let k = trace.len();
        if k >= 3 && aitken_stop(&[trace[k - 3], trace[k - 2], trace[k - 1]], cfg.epsilon, cfg.aitken) {
            converged = true;
            break;
        }
    }
    let posterior = cache.posterior();
    let labels = map_labels(&posterior);
    let imputed = impute(d, &model, &posterior, &cache)?;
    let loglik = *trace.last().expect("non-empty");
    let n_params = n_free_params(model.g, model.p, model.q);
    let b = bic(loglik, n_params, d.nrows());
    let a = awe(b, &posterior, n_params, d.nrows());
    Ok(FitResult {
        model,
        posterior,
        labels,
        imputed,
        loglik_trace: trace,
        converged,
        iterations,
        n_params,
        bic: b,
        awe: a,
        cycle_seconds,
    })
}
