//! `genecluster` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use genecluster::harness::{TableFormat, DEFAULT_SPREAD};
use genecluster::preprocess::BinScope;

mod commands;
mod failure;

use failure::Failure;

const THREADS_ENV: &str = "GENECLUSTER_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "genecluster",
    version,
    about = "Gene-expression clustering toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize and discretize an expression matrix.
    Preprocess(PreprocessArgs),
    /// Run K-Means with random or closest-pair (CCIA) seeding.
    Cluster(ClusterArgs),
    /// Score a clustering with silhouette widths.
    Silhouette(SilhouetteArgs),
    /// Run the seeded vs random comparison grid and render tables and a chart.
    Experiment(ExperimentArgs),
    /// Generate a synthetic blob matrix.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Expression matrix: header row of condition ids, one gene per row.
    #[arg(long)]
    input: PathBuf,
    /// Field delimiter; defaults to tab for .tsv/.txt and comma otherwise.
    #[arg(long)]
    delimiter: Option<char>,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Scope {
    #[default]
    Global,
    PerColumn,
}

impl From<Scope> for BinScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Global => BinScope::Global,
            Scope::PerColumn => BinScope::PerColumn,
        }
    }
}

#[derive(Debug, Args)]
struct MethodArgs {
    /// Method III bin count.
    #[arg(long, default_value_t = 4)]
    bins: usize,
    /// Method III bin range.
    #[arg(long, value_enum, default_value_t = Scope::Global)]
    scope: Scope,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Discretization method, 1 to 4.
    #[arg(long)]
    method: String,
    #[command(flatten)]
    method_args: MethodArgs,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Init {
    Random,
    Ccia,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Init::Ccia)]
    init: Init,
    /// First random seed; run `r` uses `seed + r`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random restarts; ignored for CCIA.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Cluster the raw matrix ("none") or the codes of method 1 to 4.
    #[arg(long, default_value = "none")]
    method: String,
    #[command(flatten)]
    method_args: MethodArgs,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SilhouetteArgs {
    #[command(flatten)]
    input: InputArgs,
    /// CSV with columns gene_id, cluster.
    #[arg(long)]
    assignments: PathBuf,
    /// Score in the raw space ("none") or the codes of method 1 to 4.
    #[arg(long, default_value = "none")]
    method: String,
    #[command(flatten)]
    method_args: MethodArgs,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// TOML config; built-in synthetic datasets when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: PathBuf,
    /// Table format printed on standard output.
    #[arg(long, default_value = "markdown")]
    format: TableFormat,
    /// Override the config's cluster count.
    #[arg(long)]
    k: Option<usize>,
    /// Override the config's random-run count.
    #[arg(long)]
    runs: Option<usize>,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    n_genes: usize,
    #[arg(long, default_value_t = 17)]
    n_conditions: usize,
    #[arg(long, default_value_t = 12)]
    k_true: usize,
    #[arg(long, default_value_t = DEFAULT_SPREAD)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: PathBuf,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("{THREADS_ENV} must be a count, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Silhouette(a) => commands::silhouette(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("genecluster: {f}");
            ExitCode::from(f.code())
        }
    }
}
