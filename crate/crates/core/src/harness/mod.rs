//! Comparison harness: random-init K-Means versus closest-pair-seeded
//! K-Means, per dataset and preprocessing variant, scored by mean
//! silhouette width.

mod chart;
mod config;
mod table;

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chart::{chart_svg, render_chart};
pub use config::{default_datasets, DatasetSource, ExperimentConfig, DEFAULT_SPREAD};
pub use table::{render_table, TableFormat};

use crate::cluster::{ccia_init, kmeans, random_init, CentroidSet, KMeansParams, Points};
use crate::error::{Error, Result};
use crate::matrix::{
    drop_incomplete_genes, load_matrix, synthesize_blobs, DatasetSummary, ExpressionMatrix,
    LoadOptions,
};
use crate::preprocess::{BinScope, Pipeline};
use crate::silhouette::silhouette;

/// Input to clustering: the raw matrix or one of the discretization methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum Preprocessing {
    None,
    Method1,
    Method2,
    Method3 { bins: usize, scope: BinScope },
    Method4,
}

impl Preprocessing {
    pub fn all(bins: usize, scope: BinScope) -> Vec<Self> {
        vec![
            Preprocessing::None,
            Preprocessing::Method1,
            Preprocessing::Method2,
            Preprocessing::Method3 { bins, scope },
            Preprocessing::Method4,
        ]
    }

    pub fn parse(name: &str, bins: usize, scope: BinScope) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "none" | "raw" => Ok(Preprocessing::None),
            "method1" | "1" => Ok(Preprocessing::Method1),
            "method2" | "2" => Ok(Preprocessing::Method2),
            "method3" | "3" => Ok(Preprocessing::Method3 { bins, scope }),
            "method4" | "4" => Ok(Preprocessing::Method4),
            other => Err(Error::Config(format!(
                "unknown preprocessing {other:?}; expected none or method1..method4"
            ))),
        }
    }

    pub fn pipeline(&self) -> Option<Pipeline> {
        match *self {
            Preprocessing::None => None,
            Preprocessing::Method1 => Some(Pipeline::Method1),
            Preprocessing::Method2 => Some(Pipeline::Method2),
            Preprocessing::Method3 { bins, scope } => Some(Pipeline::Method3 { bins, scope }),
            Preprocessing::Method4 => Some(Pipeline::Method4),
        }
    }

    /// Column heading used in rendered tables.
    pub fn heading(&self) -> &'static str {
        match self {
            Preprocessing::None => "Actual Data set",
            Preprocessing::Method1 => "Discretization Method-I",
            Preprocessing::Method2 => "Discretization Method-II",
            Preprocessing::Method3 { .. } => "Discretization Method-III",
            Preprocessing::Method4 => "Discretization Method-IV",
        }
    }

    /// Points to cluster for this variant.
    pub fn apply(&self, m: &ExpressionMatrix) -> Result<Points> {
        match self.pipeline() {
            None => Points::try_from(m),
            Some(p) => Points::try_from(&p.run(m)?),
        }
    }
}

impl fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preprocessing::None => f.write_str("none"),
            Preprocessing::Method1 => f.write_str("method1"),
            Preprocessing::Method2 => f.write_str("method2"),
            Preprocessing::Method3 { bins, .. } => write!(f, "method3(k={bins})"),
            Preprocessing::Method4 => f.write_str("method4"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Random initial centroids, `n_runs` seeds.
    KMeans,
    /// Closest-pair seeding, deterministic, one run.
    CciaKMeans,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::KMeans => "K-Means",
            Strategy::CciaKMeans => "CCIA with K-Means",
        }
    }
}

/// Aggregates over the runs of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub best_silhouette: f64,
    pub mean_silhouette: f64,
    /// Population standard deviation over runs.
    pub std_silhouette: f64,
    pub mean_iterations: f64,
    pub runs: usize,
    /// Seed of the best run (random strategy only).
    pub best_seed: Option<u64>,
    pub best_sse: f64,
    /// Adjusted Rand index of the best run against the generator's labels.
    /// Synthetic datasets only; an extra diagnostic, not part of the score.
    pub best_ari: Option<f64>,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok(CellStats),
    Failed { error: String },
}

impl CellOutcome {
    pub fn stats(&self) -> Option<&CellStats> {
        match self {
            CellOutcome::Ok(s) => Some(s),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: String,
    pub preprocessing: Preprocessing,
    pub strategy: Strategy,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub source: String,
    pub summary: DatasetSummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub datasets: Vec<DatasetInfo>,
    pub preprocessing: Vec<Preprocessing>,
    pub k_clusters: usize,
    pub n_runs: usize,
    pub base_seed: u64,
    /// Ordered by dataset, then strategy, then preprocessing variant.
    pub cells: Vec<Cell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExperimentResult {
    pub fn cell(&self, dataset: &str, pre: Preprocessing, strategy: Strategy) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.preprocessing == pre && c.strategy == strategy)
    }

    pub fn n_failed(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.outcome, CellOutcome::Failed { .. }))
            .count()
    }

    /// Cells where the seeded run scores at least the best random run, and
    /// the number of (dataset, preprocessing) pairs compared.
    pub fn trend(&self) -> TrendSummary {
        let mut wins = 0;
        let mut compared = 0;
        for d in &self.datasets {
            for &p in &self.preprocessing {
                let get = |s| {
                    self.cell(&d.name, p, s)
                        .and_then(|c| c.outcome.stats())
                        .map(|st| st.best_silhouette)
                };
                compared += 1;
                if let (Some(r), Some(c)) = (get(Strategy::KMeans), get(Strategy::CciaKMeans)) {
                    if c >= r {
                        wins += 1;
                    }
                }
            }
        }
        TrendSummary { wins, compared }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub wins: usize,
    pub compared: usize,
}

impl fmt::Display for TrendSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seeded >= random best-of-runs in {}/{} cells",
            self.wins, self.compared
        )
    }
}

/// One clustering run, scored.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub silhouette: f64,
    pub sse: f64,
    pub iterations: usize,
    pub assignments: Vec<usize>,
}

/// K-Means from `init`, then the mean silhouette of the final partition.
pub fn score_run(points: &Points, init: &CentroidSet, params: &KMeansParams) -> Result<RunOutcome> {
    let r = kmeans(points, init, params)?;
    let s = silhouette(points, &r.assignments, init.k())?;
    Ok(RunOutcome {
        silhouette: s.overall_mean,
        sse: r.sse,
        iterations: r.iterations,
        assignments: r.assignments,
    })
}

struct LoadedDataset {
    info: DatasetInfo,
    matrix: ExpressionMatrix,
    truth: Option<Vec<usize>>,
}

fn load_dataset(src: &DatasetSource) -> Result<LoadedDataset> {
    let (raw, truth, source, mut notes) = match src {
        DatasetSource::Synthetic { spec, notes, .. } => {
            let (m, labels) = synthesize_blobs(spec)?;
            let source = format!(
                "synthetic blobs {}x{}, k_true={}, spread={}, seed={}",
                spec.n_genes, spec.n_conditions, spec.k_true, spec.spread, spec.seed
            );
            (m, Some(labels), source, notes.clone())
        }
        DatasetSource::Csv {
            path,
            delimiter,
            missing_tokens,
            ..
        } => {
            let mut opts = LoadOptions::for_path(path);
            if let Some(d) = delimiter {
                opts.delimiter = u8::try_from(*d)
                    .map_err(|_| Error::Config(format!("delimiter {d:?} is not a single byte")))?;
            }
            if let Some(t) = missing_tokens {
                opts.missing_tokens = t.clone();
            }
            (
                load_matrix(path, &opts)?,
                None,
                format!("csv {}", path.display()),
                Vec::new(),
            )
        }
    };
    let (matrix, summary) = drop_incomplete_genes(&raw)?;
    if summary.n_genes_kept < summary.n_genes_raw {
        notes.push(format!(
            "removed {} genes with missing values",
            summary.n_genes_raw - summary.n_genes_kept
        ));
    }
    Ok(LoadedDataset {
        info: DatasetInfo {
            name: src.name().to_string(),
            source,
            summary,
            notes,
        },
        matrix,
        truth,
    })
}

fn aggregate(
    runs: &[(u64, RunOutcome)],
    truth: Option<&[usize]>,
    seeded: bool,
    secs: f64,
) -> CellStats {
    let n = runs.len() as f64;
    let mean = runs.iter().map(|(_, r)| r.silhouette).sum::<f64>() / n;
    let var = runs
        .iter()
        .map(|(_, r)| (r.silhouette - mean).powi(2))
        .sum::<f64>()
        / n;
    // first run wins ties so the result does not depend on completion order
    let (best_seed, best) = runs
        .iter()
        .fold(None::<&(u64, RunOutcome)>, |acc, r| match acc {
            Some(b) if b.1.silhouette >= r.1.silhouette => Some(b),
            _ => Some(r),
        })
        .expect("at least one run");
    CellStats {
        best_silhouette: best.silhouette,
        mean_silhouette: if runs.len() == 1 {
            best.silhouette
        } else {
            mean
        },
        std_silhouette: if runs.len() == 1 { 0.0 } else { var.sqrt() },
        mean_iterations: runs.iter().map(|(_, r)| r.iterations as f64).sum::<f64>() / n,
        runs: runs.len(),
        best_seed: (!seeded).then_some(*best_seed),
        best_sse: best.sse,
        best_ari: truth.map(|t| adjusted_rand_index(t, &best.assignments)),
        wall_time_secs: secs,
    }
}

fn run_cell(
    points: &Points,
    strategy: Strategy,
    cfg: &ExperimentConfig,
    truth: Option<&[usize]>,
) -> CellOutcome {
    let started = Instant::now();
    let outcome: Result<Vec<(u64, RunOutcome)>> = match strategy {
        Strategy::KMeans => (0..cfg.n_runs as u64)
            .into_par_iter()
            .map(|r| {
                let seed = cfg.base_seed.wrapping_add(r);
                let init = random_init(points, cfg.k_clusters, seed)?;
                Ok((seed, score_run(points, &init, &cfg.kmeans)?))
            })
            .collect(),
        // deterministic, so repeating it would only duplicate the score
        Strategy::CciaKMeans => ccia_init(points, cfg.k_clusters)
            .and_then(|init| score_run(points, &init, &cfg.kmeans))
            .map(|r| vec![(0, r)]),
    };
    match outcome {
        Ok(runs) => CellOutcome::Ok(aggregate(
            &runs,
            truth,
            strategy == Strategy::CciaKMeans,
            started.elapsed().as_secs_f64(),
        )),
        Err(e) => CellOutcome::Failed {
            error: e.to_string(),
        },
    }
}

/// Runs every (dataset, preprocessing, strategy) cell.
///
/// Dataset-level problems (unreadable file, fewer genes than clusters) are
/// errors; preprocessing or clustering failures are recorded in the
/// affected cells. Apart from `wall_time_secs` the result is a pure function
/// of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut datasets = Vec::with_capacity(cfg.datasets.len());
    let mut cells = Vec::new();
    for src in &cfg.datasets {
        let loaded = load_dataset(src).map_err(|e| wrap(src.name(), e))?;
        if loaded.matrix.n_genes() < cfg.k_clusters {
            return Err(Error::InvalidInput(format!(
                "dataset {:?}: {} complete genes, fewer than k = {}",
                src.name(),
                loaded.matrix.n_genes(),
                cfg.k_clusters
            )));
        }
        let truth = loaded.truth.as_deref();
        let per_variant: Vec<[Cell; 2]> = cfg
            .preprocessing
            .par_iter()
            .map(|&pre| {
                let cell = |strategy, outcome| Cell {
                    dataset: loaded.info.name.clone(),
                    preprocessing: pre,
                    strategy,
                    outcome,
                };
                match pre.apply(&loaded.matrix) {
                    Ok(points) => {
                        let (random, seeded) = rayon::join(
                            || run_cell(&points, Strategy::KMeans, cfg, truth),
                            || run_cell(&points, Strategy::CciaKMeans, cfg, truth),
                        );
                        [
                            cell(Strategy::KMeans, random),
                            cell(Strategy::CciaKMeans, seeded),
                        ]
                    }
                    Err(e) => {
                        let failed = || CellOutcome::Failed {
                            error: format!("preprocessing {pre}: {e}"),
                        };
                        [
                            cell(Strategy::KMeans, failed()),
                            cell(Strategy::CciaKMeans, failed()),
                        ]
                    }
                }
            })
            .collect();
        let (random, seeded): (Vec<_>, Vec<_>) =
            per_variant.into_iter().map(|[r, s]| (r, s)).unzip();
        cells.extend(random);
        cells.extend(seeded);
        datasets.push(loaded.info);
    }
    Ok(ExperimentResult {
        datasets,
        preprocessing: cfg.preprocessing.clone(),
        k_clusters: cfg.k_clusters,
        n_runs: cfg.n_runs,
        base_seed: cfg.base_seed,
        cells,
        notes: vec![
            "cell score = mean silhouette of the best run; mean/std are over runs".into(),
            "seeded cells run once: the initializer is deterministic, so repeated runs are identical".into(),
        ],
    })
}

fn wrap(dataset: &str, e: Error) -> Error {
    match e {
        Error::Io { .. } => e,
        other => Error::InvalidInput(format!("dataset {dataset:?}: {other}")),
    }
}

/// Adjusted Rand index (Hubert & Arabie) between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let pairs = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&n| pairs(n)).sum();
    let rows: f64 = (0..ka)
        .map(|i| pairs(table[i * kb..(i + 1) * kb].iter().sum()))
        .sum();
    let cols: f64 = (0..kb)
        .map(|j| pairs((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let total = pairs(a.len() as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    }
}
