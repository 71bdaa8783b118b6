//! Data generation from a mixture of generalized hyperbolic factor analyzers.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{default_names, DataMatrix};
use crate::error::{Error, Result};
use crate::gig::{Gig, GigParams};
use crate::model::MghfaModel;

/// The three-component, six-variable, two-factor benchmark model.
pub fn table1_model() -> MghfaModel {
    let loadings = [
        [-0.6, -0.1, 0.1, -0.5, -0.8, 0.8, -0.6, -0.4, 0.1, -0.4, 0.8, -0.2],
        [-0.5, -0.9, 0.4, 1.0, -0.5, -0.2, -0.4, 0.4, 0.5, 0.3, -0.8, 0.9],
        [0.7, -0.4, 0.8, 0.0, -0.2, 0.9, -0.3, 0.4, 0.3, 0.7, -0.8, 0.1],
    ];
    MghfaModel {
        g: 3,
        p: 6,
        q: 2,
        pi: vec![1.0 / 3.0; 3],
        lambda: vec![5.0, 3.0, 4.0],
        omega: vec![3.0, 6.0, 6.0],
        mu: vec![
            DVector::from_element(6, 3.0),
            DVector::zeros(6),
            DVector::from_element(6, -3.0),
        ],
        beta: vec![
            DVector::from_vec(vec![1.0, 1.0, -1.0, 1.0, -1.0, 1.0]),
            DVector::from_vec(vec![-1.0, 1.0, 1.0, 1.0, 1.0, -1.0]),
            DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0]),
        ],
        loadings: loadings.iter().map(|l| DMatrix::from_row_slice(6, 2, l)).collect(),
        psi: vec![
            DVector::from_element(6, 2.0),
            DVector::from_element(6, 1.0),
            DVector::from_element(6, 1.0),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub model: MghfaModel,
    pub n_per_component: Vec<usize>,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(model: MghfaModel, n_per_component: Vec<usize>, seed: u64) -> Result<Self> {
        model.validate()?;
        if n_per_component.len() != model.g || n_per_component.iter().any(|&c| c == 0) {
            return Err(Error::invalid(
                "n_per_component",
                format!("need {} positive counts", model.g),
            ));
        }
        Ok(Self {
            model,
            n_per_component,
            seed,
        })
    }
}

/// Draws `n_g` rows from each component as
/// `μ_g + W β_g + √W (Λ_g U + ε)` and shuffles them. Returns the data and
/// the generating component of each row.
pub fn simulate_mghfa<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<(DataMatrix, Vec<usize>)> {
    let m = &spec.model;
    m.validate()?;
    let (p, q) = (m.p, m.q);
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(spec.n_per_component.iter().sum());
    for k in 0..m.g {
        let gig = Gig::new(GigParams::new(m.lambda[k], m.omega[k], m.omega[k])?)?;
        let sd: Vec<f64> = m.psi[k].iter().map(|v| v.sqrt()).collect();
        for _ in 0..spec.n_per_component[k] {
            let w = gig.sample(rng);
            let u: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
            let sw = w.sqrt();
            let mut x = Vec::with_capacity(p);
            for j in 0..p {
                let e: f64 = rng.sample(StandardNormal);
                let mut f = sd[j] * e;
                for t in 0..q {
                    f += m.loadings[k][(j, t)] * u[t];
                }
                x.push(m.mu[k][j] + w * m.beta[k][j] + sw * f);
            }
            rows.push((x, k));
        }
    }
    rows.shuffle(rng);
    let n = rows.len();
    let labels = rows.iter().map(|r| r.1).collect();
    let values = rows.into_iter().flat_map(|r| r.0).collect();
    Ok((DataMatrix::complete(n, p, values, default_names(p))?, labels))
}

/// [`simulate_mghfa`] with a ChaCha8 stream seeded from `spec.seed`.
pub fn simulate_seeded(spec: &SimSpec) -> Result<(DataMatrix, Vec<usize>)> {
    simulate_mghfa(spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_entries() {
        let m = table1_model();
        m.validate().unwrap();
        assert_eq!(m.lambda[1], 3.0);
        assert_eq!((m.loadings[2][(0, 0)], m.loadings[2][(0, 1)]), (0.7, -0.4));
        assert!((m.pi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SimSpec::new(table1_model(), vec![20, 20, 20], 1).unwrap();
        let a = simulate_mghfa(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = simulate_mghfa(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.nrows(), 60);
        assert_eq!(a.1.iter().filter(|&&l| l == 2).count(), 20);
    }
}
