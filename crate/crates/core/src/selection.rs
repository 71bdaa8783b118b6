//! Fitting a grid of `(G, q)` models and picking the best by BIC or AWE.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aecm::{check_factor_count, fit, FitConfig};
use crate::data::DataMatrix;
use crate::evaluation::{entropy, SelectionScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub g: usize,
    pub q: usize,
    pub score: Option<SelectionScore>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub cells: Vec<GridCell>,
    pub best_bic: Option<(usize, usize)>,
    pub best_awe: Option<(usize, usize)>,
}

fn argmax(cells: &[GridCell], key: impl Fn(&SelectionScore) -> f64) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for c in cells {
        if let Some(s) = &c.score {
            let v = key(s);
            if v.is_finite() && best.is_none_or(|b| v > b.0) {
                best = Some((v, c.g, c.q));
            }
        }
    }
    best.map(|b| (b.1, b.2))
}

/// Fits every `(G, q)` pair with the settings of `base`. Failed cells keep
/// their error message and the grid carries on.
pub fn fit_grid(d: &DataMatrix, gs: &[usize], qs: &[usize], base: &FitConfig) -> GridReport {
    let pairs: Vec<(usize, usize)> = gs.iter().flat_map(|&g| qs.iter().map(move |&q| (g, q))).collect();
    let cells: Vec<GridCell> = pairs
        .par_iter()
        .map(|&(g, q)| {
            let cfg = FitConfig { g, q, ..*base };
            let outcome = check_factor_count(d.ncols(), q).and_then(|_| fit(d, &cfg));
            match outcome {
                Ok(r) => GridCell {
                    g,
                    q,
                    score: Some(SelectionScore {
                        loglik: r.loglik(),
                        n_params: r.n_params,
                        bic: r.bic,
                        awe: r.awe,
                        entropy: entropy(&r.posterior),
                    }),
                    converged: r.converged,
                    iterations: r.iterations,
                    error: None,
                },
                Err(e) => GridCell {
                    g,
                    q,
                    score: None,
                    converged: false,
                    iterations: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    GridReport {
        best_bic: argmax(&cells, |s| s.bic),
        best_awe: argmax(&cells, |s| s.awe),
        cells,
    }
}
