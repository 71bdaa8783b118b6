//! Replicated simulation study over removal patterns and rates.

use mghfa::data::{write_json, write_table};
use mghfa::{apply_mar, ari, err, imputation_mse, mean_impute, table1_model, DataMatrix, MarPattern, MarSpec, SimSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::commands::{fit_config, CliError, CliResult, Outputs};
use crate::manifest::{derive_seed, RunManifest};
use crate::ReproduceArgs;

// Counter offsets that keep the three seed streams apart.
const MAR_STREAM: u64 = 1 << 32;
const FIT_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, Serialize)]
struct Replicate {
    pattern: u8,
    rate: f64,
    rep: usize,
    data_seed: u64,
    mar_seed: u64,
    fit_seed: u64,
    ari: Option<f64>,
    err: Option<f64>,
    mse: Option<f64>,
    mse_mean: Option<f64>,
    loglik: Option<f64>,
    bic: Option<f64>,
    awe: Option<f64>,
    iterations: usize,
    converged: bool,
    best_bic: Option<(usize, usize)>,
    best_awe: Option<(usize, usize)>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct Stat {
    mean: f64,
    sd: f64,
    n: usize,
}

fn stat(values: impl Iterator<Item = Option<f64>>) -> Option<Stat> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Stat { mean, sd, n })
}

#[derive(Debug, Serialize)]
struct CellSummary {
    pattern: u8,
    rate: f64,
    replicates: usize,
    failed: usize,
    converged: usize,
    ari: Option<Stat>,
    err: Option<Stat>,
    mse: Option<Stat>,
    mse_mean: Option<Stat>,
    bic_freq: Option<usize>,
    awe_freq: Option<usize>,
}

struct Job {
    pattern: MarPattern,
    rate: f64,
    rep: usize,
    counter: u64,
}

fn run_job(a: &ReproduceArgs, job: &Job, data: &(DataMatrix, Vec<usize>), data_seed: u64) -> Replicate {
    let master = a.settings.seed;
    let mar_seed = derive_seed(master, MAR_STREAM + job.counter);
    let fit_seed = derive_seed(master, FIT_STREAM + job.counter);
    let mut out = Replicate {
        pattern: job.pattern.index(),
        rate: job.rate,
        rep: job.rep,
        data_seed,
        mar_seed,
        fit_seed,
        ari: None,
        err: None,
        mse: None,
        mse_mean: None,
        loglik: None,
        bic: None,
        awe: None,
        iterations: 0,
        converged: false,
        best_bic: None,
        best_awe: None,
        error: None,
    };
    let (complete, truth) = data;
    let outcome = (|| -> mghfa::Result<()> {
        let spec = MarSpec::new(job.pattern, job.rate, complete.nrows())?;
        let d = apply_mar(complete, &spec, &mut ChaCha8Rng::seed_from_u64(mar_seed))?;
        let removed: Vec<bool> = d.mask().iter().map(|&m| !m).collect();
        let any_removed = removed.iter().any(|&r| r);
        if any_removed {
            out.mse_mean = Some(imputation_mse(complete, &mean_impute(&d)?, &removed)?);
        }
        if a.select {
            let gs: Vec<usize> = (a.g_range.0..=a.g_range.1).collect();
            let qs: Vec<usize> = (a.q_range.0..=a.q_range.1).collect();
            let report = mghfa::fit_grid(&d, &gs, &qs, &fit_config(a.g, a.q, &a.settings, fit_seed));
            out.best_bic = report.best_bic;
            out.best_awe = report.best_awe;
        }
        let r = mghfa::fit(&d, &fit_config(a.g, a.q, &a.settings, fit_seed))?;
        out.ari = Some(ari(&r.labels, truth)?);
        out.err = Some(err(&r.labels, truth)?);
        if any_removed {
            out.mse = Some(imputation_mse(complete, &r.imputed, &removed)?);
        }
        out.loglik = Some(r.loglik());
        out.bic = Some(r.bic);
        out.awe = Some(r.awe);
        out.iterations = r.iterations;
        out.converged = r.converged;
        Ok(())
    })();
    if let Err(e) = outcome {
        out.error = Some(e.to_string());
    }
    out
}

fn fmt_stat(s: &Option<Stat>) -> String {
    s.as_ref()
        .map_or_else(|| "-".to_string(), |s| format!("{:.3} ({:.3})", s.mean, s.sd))
}

pub fn run(a: &ReproduceArgs) -> CliResult {
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let mut patterns = Vec::new();
    for &k in &a.patterns {
        patterns.push(MarPattern::from_index(k).map_err(|e| CliError::Usage(e.to_string()))?);
    }
    for &r in &a.rates {
        MarSpec::new(MarPattern::One, r, 1).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let model = table1_model();
    let p = model.p;
    mghfa::aecm::check_factor_count(p, a.q).map_err(|e| CliError::Usage(e.to_string()))?;

    // One complete data set per replicate, shared by every pattern and rate.
    let data_seeds: Vec<u64> = (0..a.reps).map(|r| derive_seed(a.settings.seed, r as u64)).collect();
    let datasets: Vec<(DataMatrix, Vec<usize>)> = data_seeds
        .par_iter()
        .map(|&s| {
            let spec = SimSpec::new(model.clone(), vec![a.n_per_g; model.g], s)?;
            mghfa::simulate::simulate_seeded(&spec)
        })
        .collect::<mghfa::Result<_>>()?;

    let mut jobs = Vec::new();
    for &pattern in &patterns {
        for &rate in &a.rates {
            for rep in 0..a.reps {
                let counter = jobs.len() as u64;
                jobs.push(Job {
                    pattern,
                    rate,
                    rep,
                    counter,
                });
            }
        }
    }
    let reps: Vec<Replicate> = jobs
        .par_iter()
        .map(|j| run_job(a, j, &datasets[j.rep], data_seeds[j.rep]))
        .collect();

    let target = (a.g, a.q);
    let mut cells = Vec::new();
    for &pattern in &patterns {
        for &rate in &a.rates {
            let rows: Vec<&Replicate> = reps
                .iter()
                .filter(|r| r.pattern == pattern.index() && r.rate == rate)
                .collect();
            cells.push(CellSummary {
                pattern: pattern.index(),
                rate,
                replicates: rows.len(),
                failed: rows.iter().filter(|r| r.error.is_some()).count(),
                converged: rows.iter().filter(|r| r.converged).count(),
                ari: stat(rows.iter().map(|r| r.ari)),
                err: stat(rows.iter().map(|r| r.err)),
                mse: stat(rows.iter().map(|r| r.mse)),
                mse_mean: stat(rows.iter().map(|r| r.mse_mean)),
                bic_freq: a.select.then(|| rows.iter().filter(|r| r.best_bic == Some(target)).count()),
                awe_freq: a.select.then(|| rows.iter().filter(|r| r.best_awe == Some(target)).count()),
            });
        }
    }

    println!(
        "{:>7} {:>5} {:>17} {:>17} {:>17} {:>17} {:>5} {:>5} {:>6} {:>6}",
        "pattern", "rate", "ARI", "ERR", "MSE", "MSE (mean)", "BIC", "AWE", "conv", "failed"
    );
    for c in &cells {
        let freq = |f: Option<usize>| f.map_or_else(|| "-".to_string(), |v| v.to_string());
        println!(
            "{:>7} {:>5} {:>17} {:>17} {:>17} {:>17} {:>5} {:>5} {:>6} {:>6}",
            c.pattern,
            format!("{:.0}%", c.rate * 100.0),
            fmt_stat(&c.ari),
            fmt_stat(&c.err),
            fmt_stat(&c.mse),
            fmt_stat(&c.mse_mean),
            freq(c.bic_freq),
            freq(c.awe_freq),
            format!("{}/{}", c.converged, c.replicates),
            c.failed
        );
    }

    let config = json!({
        "reps": a.reps,
        "patterns": a.patterns,
        "rates": a.rates,
        "n_per_g": a.n_per_g,
        "fit": fit_config(a.g, a.q, &a.settings, a.settings.seed),
        "select": a.select,
        "g_range": a.g_range,
        "q_range": a.q_range,
    });
    let mut out = Outputs::new(&a.out, RunManifest::new("reproduce", Some(a.settings.seed), config))?;
    let header: Vec<String> = [
        "pattern", "rate", "rep", "data_seed", "mar_seed", "fit_seed", "ari", "err", "mse", "mse_mean", "loglik", "bic", "awe",
        "iterations", "converged", "best_bic", "best_awe", "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:?}"));
    let pair = |v: Option<(usize, usize)>| v.map_or_else(String::new, |(g, q)| format!("{g}:{q}"));
    write_table(
        out.path("replicates.csv"),
        &header,
        reps.iter().map(|r| {
            vec![
                r.pattern.to_string(),
                r.rate.to_string(),
                r.rep.to_string(),
                r.data_seed.to_string(),
                r.mar_seed.to_string(),
                r.fit_seed.to_string(),
                opt(r.ari),
                opt(r.err),
                opt(r.mse),
                opt(r.mse_mean),
                opt(r.loglik),
                opt(r.bic),
                opt(r.awe),
                r.iterations.to_string(),
                r.converged.to_string(),
                pair(r.best_bic),
                pair(r.best_awe),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )?;
    write_json(out.path("summary.json"), &cells)?;
    out.finish()
}
