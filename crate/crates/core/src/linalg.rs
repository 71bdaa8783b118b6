//! Small dense helpers shared by the density and estimation code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub(crate) fn chol_log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Inverse and log-determinant of `ΛΛ' + diag(ψ)`.
#[derive(Debug, Clone)]
pub struct FactorInverse {
    pub inverse: DMatrix<f64>,
    pub log_det: f64,
}

/// Below this ratio of `min ψ` to the largest diagonal entry the Woodbury
/// form loses too many digits and the full matrix is factored instead.
const WOODBURY_MIN_RATIO: f64 = 1e-7;

/// Inverts `ΛΛ' + diag(ψ)`, using the Woodbury identity when the diagonal is
/// well conditioned.
pub fn factor_inverse(loadings: &DMatrix<f64>, psi: &[f64]) -> Result<FactorInverse> {
    let p = loadings.nrows();
    let q = loadings.ncols();
    debug_assert_eq!(psi.len(), p);
    if p == 0 {
        return Ok(FactorInverse {
            inverse: DMatrix::zeros(0, 0),
            log_det: 0.0,
        });
    }
    let max_diag = (0..p)
        .map(|i| psi[i] + loadings.row(i).norm_squared())
        .fold(0.0_f64, f64::max);
    let min_psi = psi.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_psi > 0.0) {
        return Err(Error::NotPositiveDefinite("uniqueness must be positive".into()));
    }
    if q == 0 || min_psi >= WOODBURY_MIN_RATIO * max_diag {
        let inv_psi: Vec<f64> = psi.iter().map(|v| 1.0 / v).collect();
        // D^{-1} Λ
        let mut dl = loadings.clone();
        for i in 0..p {
            for j in 0..q {
                dl[(i, j)] *= inv_psi[i];
            }
        }
        let mut core = loadings.transpose() * &dl;
        for j in 0..q {
            core[(j, j)] += 1.0;
        }
        let cc = cholesky(&core, "I + Λ'Ψ⁻¹Λ")?;
        let mut inverse = -(&dl * cc.solve(&dl.transpose()));
        for i in 0..p {
            inverse[(i, i)] += inv_psi[i];
        }
        symmetrize(&mut inverse);
        let log_det = psi.iter().map(|v| v.ln()).sum::<f64>() + chol_log_det(&cc);
        Ok(FactorInverse { inverse, log_det })
    } else {
        let mut sigma = loadings * loadings.transpose();
        for i in 0..p {
            sigma[(i, i)] += psi[i];
        }
        let c = cholesky(&sigma, "ΛΛ' + Ψ")?;
        let mut inverse = c.inverse();
        symmetrize(&mut inverse);
        Ok(FactorInverse {
            inverse,
            log_det: chol_log_det(&c),
        })
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigenpairs sorted by decreasing eigenvalue; each eigenvector is signed so
/// that its largest-magnitude entry is positive.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the solver's order among exact ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &k) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        let mut best = 0;
        for i in 1..n {
            if v[i].abs() > v[best].abs() + 1e-12 {
                best = i;
            }
        }
        if v[best] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(dst, &v);
    }
    (values, vectors)
}
