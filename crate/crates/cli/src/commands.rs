use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use mghfa::data::{read_labels, read_mask, write_json, write_labels, write_mask, write_matrix, write_table, DEFAULT_MISSING_TOKENS};
use mghfa::{
    apply_mar, ari, err, imputation_mse, mean_impute, read_csv, write_csv, DataMatrix, Error, FitConfig, FitResult, MarPattern,
    MarSpec, MghfaModel, SimSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::manifest::{derive_seed, RunManifest};
use crate::{CorruptArgs, EvaluateArgs, FitArgs, FitSettings, SelectArgs, SimulateArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(Error::Io { .. } | Error::Parse { .. } | Error::Serde(_)) => 4,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|source| {
        Error::Io {
            path: dir.to_path_buf(),
            source,
        }
        .into()
    })
}

pub fn read_data(path: &Path) -> CliResult<DataMatrix> {
    Ok(read_csv(path, &DEFAULT_MISSING_TOKENS)?)
}

/// Records each output path in the manifest as it is written.
pub struct Outputs<'a> {
    pub dir: &'a Path,
    pub manifest: RunManifest,
}

impl<'a> Outputs<'a> {
    pub fn new(dir: &'a Path, manifest: RunManifest) -> CliResult<Self> {
        create_dir(dir)?;
        Ok(Self { dir, manifest })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.manifest.outputs.push(p.clone());
        p
    }

    pub fn finish(self) -> CliResult {
        Ok(self.manifest.write(self.dir)?)
    }
}

pub fn fit_config(g: usize, q: usize, s: &FitSettings, seed: u64) -> FitConfig {
    let mut cfg = FitConfig::new(g, q).with_seed(seed);
    cfg.epsilon = s.epsilon;
    cfg.max_iter = s.max_iter;
    cfg.aitken = s.aitken.into();
    cfg
}

fn check_settings(s: &FitSettings) -> CliResult {
    if !(s.epsilon > 0.0) {
        return Err(CliError::Usage(format!("--epsilon must be positive, got {}", s.epsilon)));
    }
    if s.max_iter == 0 {
        return Err(CliError::Usage("--max-iter must be at least 1".into()));
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> CliResult {
    let model = if a.model == "table1" {
        mghfa::table1_model()
    } else {
        MghfaModel::load(&a.model)?
    };
    let counts = match a.n_per_g.as_slice() {
        [n] => vec![*n; model.g],
        c if c.len() == model.g => c.to_vec(),
        c => {
            return Err(CliError::Usage(format!(
                "--n-per-g has {} values but the model has {} components",
                c.len(),
                model.g
            )))
        }
    };
    let spec = SimSpec::new(model, counts, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let (data, labels) = mghfa::simulate::simulate_seeded(&spec)?;

    let config = json!({
        "model_source": a.model,
        "model": spec.model.to_document(),
        "n_per_component": spec.n_per_component,
    });
    let mut out = Outputs::new(&a.out, RunManifest::new("simulate", Some(a.seed), config))?;
    write_csv(out.path("data.csv"), &data)?;
    write_labels(out.path("labels.csv"), &labels)?;
    out.finish()?;
    println!("wrote {} x {} data to {}", data.nrows(), data.ncols(), a.out.display());
    Ok(())
}

pub fn corrupt(a: &CorruptArgs) -> CliResult {
    let pattern = MarPattern::from_index(a.pattern).map_err(|e| CliError::Usage(e.to_string()))?;
    let data = read_data(&a.input)?;
    if !data.is_complete() {
        return Err(CliError::Core(Error::InvalidData(format!(
            "{} already has {} missing cells; corrupt needs complete data",
            a.input.display(),
            data.n_missing()
        ))));
    }
    let spec = MarSpec::new(pattern, a.rate, data.nrows()).map_err(|e| CliError::Usage(e.to_string()))?;
    let corrupted = apply_mar(&data, &spec, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    let removed: Vec<bool> = corrupted.mask().iter().map(|&m| !m).collect();

    let config = json!({ "mar": spec });
    let mut out = Outputs::new(&a.out, RunManifest::new("corrupt", Some(a.seed), config).input(&a.input))?;
    write_csv(out.path("data.csv"), &corrupted)?;
    write_mask(out.path("removed.csv"), data.column_names(), data.ncols(), &removed)?;
    out.finish()?;
    println!(
        "removed {} cells ({} per column) from {} rows",
        corrupted.n_missing(),
        spec.total(),
        data.nrows()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitSummary {
    g: usize,
    q: usize,
    n: usize,
    p: usize,
    seed: u64,
    loglik: f64,
    n_params: usize,
    bic: f64,
    awe: f64,
    iterations: usize,
    converged: bool,
}

/// Fits with `cfg`, retrying with derived seeds when a component collapses.
fn fit_with_retries(d: &DataMatrix, cfg: FitConfig, retries: usize) -> CliResult<(FitResult, FitConfig)> {
    let mut cfg = cfg;
    let master = cfg.seed;
    for attempt in 0..=retries {
        match mghfa::fit(d, &cfg) {
            Ok(r) => return Ok((r, cfg)),
            Err(e @ Error::DegenerateComponent { .. }) => {
                let next = derive_seed(master, attempt as u64 + 1);
                if attempt == retries {
                    eprintln!("fit failed with seed {}: {e}", cfg.seed);
                    eprintln!("hint: rerun with --seed {next} or pass --retries to try further seeds");
                    return Err(e.into());
                }
                eprintln!("seed {} failed ({e}); retrying with seed {next}", cfg.seed);
                cfg = cfg.with_seed(next);
            }
            Err(e) => {
                eprintln!("fit failed for G = {}, q = {}, seed {}", cfg.g, cfg.q, cfg.seed);
                return Err(e.into());
            }
        }
    }
    unreachable!("the last attempt always returns")
}

pub fn fit(a: &FitArgs) -> CliResult {
    check_settings(&a.settings)?;
    let data = read_data(&a.input)?;
    let cfg = fit_config(a.g, a.q, &a.settings, a.settings.seed);
    cfg.validate(data.nrows(), data.ncols())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (r, used) = fit_with_retries(&data, cfg, a.retries)?;

    let config = json!({ "fit": used, "retries": a.retries, "requested_seed": a.settings.seed });
    let mut out = Outputs::new(&a.out, RunManifest::new("fit", Some(used.seed), config).input(&a.input))?;
    r.model.save(out.path("model.json"))?;
    let post_header: Vec<String> = (1..=a.g).map(|k| format!("z{k}")).collect();
    let post_rows: Vec<Vec<f64>> = r.posterior.row_iter().map(|row| row.iter().copied().collect()).collect();
    write_matrix(out.path("posterior.csv"), &post_header, &post_rows)?;
    write_labels(out.path("labels.csv"), &r.labels)?;
    write_csv(out.path("imputed.csv"), &r.imputed)?;
    write_table(
        out.path("loglik.csv"),
        &["iteration".to_string(), "loglik".to_string()],
        r.loglik_trace
            .iter()
            .enumerate()
            .map(|(k, l)| [k.to_string(), format!("{l:?}")]),
    )?;
    let summary = FitSummary {
        g: a.g,
        q: a.q,
        n: data.nrows(),
        p: data.ncols(),
        seed: used.seed,
        loglik: r.loglik(),
        n_params: r.n_params,
        bic: r.bic,
        awe: r.awe,
        iterations: r.iterations,
        converged: r.converged,
    };
    write_json(out.path("summary.json"), &summary)?;
    if a.timing {
        // Wall-clock times differ between runs, so they stay out of the default outputs.
        write_table(
            out.path("timing.csv"),
            &["iteration".to_string(), "cycle1_s".to_string(), "cycle2_s".to_string()],
            r.cycle_seconds
                .iter()
                .enumerate()
                .map(|(k, t)| [(k + 1).to_string(), t[0].to_string(), t[1].to_string()]),
        )?;
    }
    out.finish()?;

    if !r.converged {
        eprintln!("warning: no convergence after {} iterations", r.iterations);
    }
    println!("loglik      {:.6}", r.loglik());
    println!("BIC         {:.6}", r.bic);
    println!("AWE         {:.6}", r.awe);
    println!("iterations  {}", r.iterations);
    println!("converged   {}", r.converged);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn select(a: &SelectArgs) -> CliResult {
    check_settings(&a.settings)?;
    let data = read_data(&a.input)?;
    let gs: Vec<usize> = (a.g_range.0..=a.g_range.1).collect();
    let qs: Vec<usize> = (a.q_range.0..=a.q_range.1).collect();
    let base = fit_config(gs[0], qs[0], &a.settings, a.settings.seed);
    let report = mghfa::fit_grid(&data, &gs, &qs, &base);

    println!(
        "{:>3} {:>3} {:>14} {:>14} {:>14} {:>6} {:>9}  note",
        "G", "q", "loglik", "BIC", "AWE", "iter", "converged"
    );
    for c in &report.cells {
        let s = c.score.as_ref();
        println!(
            "{:>3} {:>3} {:>14} {:>14} {:>14} {:>6} {:>9}  {}",
            c.g,
            c.q,
            fmt_opt(s.map(|s| s.loglik)),
            fmt_opt(s.map(|s| s.bic)),
            fmt_opt(s.map(|s| s.awe)),
            c.iterations,
            c.converged,
            c.error.as_deref().unwrap_or("")
        );
    }
    let show = |name: &str, best: Option<(usize, usize)>| match best {
        Some((g, q)) => println!("best {name}: G = {g}, q = {q}"),
        None => println!("best {name}: none (every cell failed)"),
    };
    show("BIC", report.best_bic);
    show("AWE", report.best_awe);

    if let Some(dir) = &a.out {
        let config = json!({ "base": base, "g": gs, "q": qs });
        let mut out = Outputs::new(dir, RunManifest::new("select", Some(a.settings.seed), config).input(&a.input))?;
        write_json(out.path("select.json"), &report)?;
        out.finish()?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Evaluation {
    ari: f64,
    err: f64,
    mse_imputed: Option<f64>,
    mse_mean_imputation: Option<f64>,
    removed_cells: Option<usize>,
}

fn check_shape(what: &Path, d: &DataMatrix, n: usize, p: usize) -> CliResult {
    if (d.nrows(), d.ncols()) != (n, p) {
        return Err(CliError::Core(Error::InvalidData(format!(
            "{} is {} x {}, expected {n} x {p}",
            what.display(),
            d.nrows(),
            d.ncols()
        ))));
    }
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult {
    let pred = read_labels(&a.pred)?;
    let truth = read_labels(&a.truth)?;
    if pred.len() != truth.len() {
        return Err(CliError::Core(Error::InvalidData(format!(
            "{} has {} labels but {} has {}",
            a.pred.display(),
            pred.len(),
            a.truth.display(),
            truth.len()
        ))));
    }
    let mut ev = Evaluation {
        ari: ari(&pred, &truth)?,
        err: err(&pred, &truth)?,
        mse_imputed: None,
        mse_mean_imputation: None,
        removed_cells: None,
    };
    let mut manifest = RunManifest::new("evaluate", None, json!({})).input(&a.pred).input(&a.truth);
    if let (Some(cp), Some(mp)) = (&a.complete, &a.mask) {
        let complete = read_data(cp)?;
        let (n, p, removed) = read_mask(mp)?;
        check_shape(mp, &complete, n, p)?;
        ev.removed_cells = Some(removed.iter().filter(|&&r| r).count());
        manifest = manifest.input(cp).input(mp);
        if let Some(ip) = &a.imputed {
            let imputed = read_data(ip)?;
            check_shape(ip, &imputed, n, p)?;
            ev.mse_imputed = Some(imputation_mse(&complete, &imputed, &removed)?);
            manifest = manifest.input(ip);
        }
        if let Some(xp) = &a.corrupted {
            let corrupted = read_data(xp)?;
            check_shape(xp, &corrupted, n, p)?;
            ev.mse_mean_imputation = Some(imputation_mse(&complete, &mean_impute(&corrupted)?, &removed)?);
            manifest = manifest.input(xp);
        }
    }

    println!("ARI                  {:.6}", ev.ari);
    println!("ERR                  {:.6}", ev.err);
    if let Some(v) = ev.mse_imputed {
        println!("MSE                  {v:.6}");
    }
    if let Some(v) = ev.mse_mean_imputation {
        println!("MSE (mean imputed)   {v:.6}");
    }
    if let Some(dir) = &a.out {
        let mut out = Outputs::new(dir, manifest)?;
        write_json(out.path("evaluate.json"), &ev)?;
        out.finish()?;
    }
    Ok(())
}
