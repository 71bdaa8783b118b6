mod commands;
mod manifest;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Clustering and imputation with mixtures of generalized hyperbolic factor
/// analyzers.
#[derive(Debug, Parser)]
#[command(name = "mghfa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a data set from a model.
    Simulate(SimulateArgs),
    /// Remove cells from a complete data set with one of the block patterns.
    Corrupt(CorruptArgs),
    /// Fit a model and write posteriors, labels and imputed data.
    Fit(FitArgs),
    /// Fit a grid of (G, q) models and rank them by BIC and AWE.
    Select(SelectArgs),
    /// Compare predicted labels and imputations with the truth.
    Evaluate(EvaluateArgs),
    /// Run the replicated simulation study and summarise it.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Path to a model document, or `table1` for the built-in ground truth.
    #[arg(long, default_value = "table1")]
    pub model: String,
    /// Rows per component: one value for all, or a comma-separated list.
    #[arg(long, value_delimiter = ',', default_value = "200")]
    pub n_per_g: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub pattern: u8,
    #[arg(long)]
    pub rate: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AitkenArg {
    Newest,
    Paper,
}

impl From<AitkenArg> for mghfa::AitkenVariant {
    fn from(a: AitkenArg) -> Self {
        match a {
            AitkenArg::Newest => mghfa::AitkenVariant::Newest,
            AitkenArg::Paper => mghfa::AitkenVariant::Paper,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitSettings {
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "newest")]
    pub aitken: AitkenArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub g: usize,
    #[arg(long)]
    pub q: usize,
    #[command(flatten)]
    pub settings: FitSettings,
    /// Extra attempts with derived seeds when a component collapses.
    #[arg(long, default_value_t = 0)]
    pub retries: usize,
    /// Also write per-iteration cycle timings.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Inclusive range `a:b`.
    #[arg(long, value_parser = parse_range, default_value = "1:4")]
    pub g_range: (usize, usize),
    #[arg(long, value_parser = parse_range, default_value = "1:3")]
    pub q_range: (usize, usize),
    #[command(flatten)]
    pub settings: FitSettings,
    /// Directory for the JSON report and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted labels.
    #[arg(long)]
    pub pred: PathBuf,
    /// True labels.
    #[arg(long)]
    pub truth: PathBuf,
    /// Complete data before removal.
    #[arg(long, requires = "mask")]
    pub complete: Option<PathBuf>,
    /// Removed-cell mask written by `corrupt`.
    #[arg(long, requires = "complete")]
    pub mask: Option<PathBuf>,
    /// Imputed data to score.
    #[arg(long, requires = "complete")]
    pub imputed: Option<PathBuf>,
    /// Corrupted data; scores column-mean imputation as a baseline.
    #[arg(long, requires = "complete")]
    pub corrupted: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub patterns: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3")]
    pub rates: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub n_per_g: usize,
    #[arg(long, default_value_t = 3)]
    pub g: usize,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    /// Also fit the selection grid for every replicate and count winners.
    #[arg(long)]
    pub select: bool,
    #[arg(long, value_parser = parse_range, default_value = "2:4")]
    pub g_range: (usize, usize),
    #[arg(long, value_parser = parse_range, default_value = "1:3")]
    pub q_range: (usize, usize),
    #[command(flatten)]
    pub settings: FitSettings,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if a == 0 || a > b {
        return Err(format!("need 1 <= a <= b, got {s}"));
    }
    Ok((a, b))
}

/// Caps the rayon pool from `MGHFA_THREADS`.
fn configure_threads() -> Result<(), commands::CliError> {
    let Ok(v) = std::env::var("MGHFA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| commands::CliError::Usage(format!("MGHFA_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|_| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Corrupt(a) => commands::corrupt(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Select(a) => commands::select(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Reproduce(a) => reproduce::run(&a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
