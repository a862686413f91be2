//! TOML experiment configuration.
//!
//! Every field is optional:
//!
//! ```toml
//! k_clusters = 12
//! n_runs = 10
//! base_seed = 0
//! bins = 4                  # Method III bin count
//! bin_scope = "global"      # or "per-column"
//! preprocessing = ["none", "method1", "method2", "method3", "method4"]
//!
//! [kmeans]
//! max_iters = 300
//! tol = 1e-6
//!
//! [[datasets]]
//! kind = "synthetic"
//! name = "yeast-like"
//! n_genes = 2882
//! n_conditions = 17
//! k_true = 12
//! spread = 1.5
//! seed = 2
//!
//! [[datasets]]
//! kind = "csv"
//! name = "yeast"
//! path = "yeast.tsv"        # relative to the config file
//! delimiter = "\t"          # default: tab for .tsv/.txt, comma otherwise
//! missing_tokens = ["NA"]
//! ```
//!
//! Without a `datasets` list, four synthetic stand-ins shaped 517×17,
//! 2882×17, 300×17 and 7129×34 are used.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Preprocessing;
use crate::cluster::KMeansParams;
use crate::error::{Error, Result};
use crate::matrix::BlobSpec;
use crate::preprocess::BinScope;

/// Blob spread used by the built-in synthetic datasets.
pub const DEFAULT_SPREAD: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic {
        name: String,
        #[serde(flatten)]
        spec: BlobSpec,
        /// Notes carried into the result metadata.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        notes: Vec<String>,
    },
    Csv {
        name: String,
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delimiter: Option<char>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        missing_tokens: Option<Vec<String>>,
    },
}

impl DatasetSource {
    pub fn name(&self) -> &str {
        match self {
            DatasetSource::Synthetic { name, .. } | DatasetSource::Csv { name, .. } => name,
        }
    }

    pub fn synthetic(name: &str, spec: BlobSpec) -> Self {
        DatasetSource::Synthetic {
            name: name.to_string(),
            spec,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    pub preprocessing: Vec<Preprocessing>,
    pub k_clusters: usize,
    pub n_runs: usize,
    pub base_seed: u64,
    pub kmeans: KMeansParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: default_datasets(),
            preprocessing: Preprocessing::all(4, BinScope::Global),
            k_clusters: 12,
            n_runs: 10,
            base_seed: 0,
            kmeans: KMeansParams::default(),
        }
    }
}

/// Synthetic stand-ins matching the shapes of the four reference datasets.
pub fn default_datasets() -> Vec<DatasetSource> {
    let blob = |n_genes, n_conditions, seed| BlobSpec {
        n_genes,
        n_conditions,
        k_true: 12,
        spread: DEFAULT_SPREAD,
        seed,
    };
    let width_note =
        "condition count 17 is a harness default; the source dataset's width is unknown";
    vec![
        DatasetSource::Synthetic {
            name: "serum-like".into(),
            spec: blob(517, 17, 1),
            notes: vec![width_note.into()],
        },
        DatasetSource::synthetic("yeast-like", blob(2882, 17, 2)),
        DatasetSource::Synthetic {
            name: "simulated-like".into(),
            spec: blob(300, 17, 3),
            notes: vec![width_note.into()],
        },
        DatasetSource::synthetic("leukemia-like", blob(7129, 34, 4)),
    ]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs < 1 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if self.k_clusters < 2 {
            return Err(Error::Config("k_clusters must be at least 2".into()));
        }
        if self.kmeans.tol.is_nan() || self.kmeans.tol < 0.0 {
            return Err(Error::Config("kmeans.tol must be nonnegative".into()));
        }
        for p in &self.preprocessing {
            if let Preprocessing::Method3 { bins: 0, .. } = p {
                return Err(Error::Config("bins must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Parses a TOML document. Relative CSV paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let defaults = ExperimentConfig::default();
        let bins = raw.bins.unwrap_or(4);
        let scope = raw.bin_scope.unwrap_or_default();
        let preprocessing = match raw.preprocessing {
            None => Preprocessing::all(bins, scope),
            Some(names) => names
                .iter()
                .map(|n| Preprocessing::parse(n, bins, scope))
                .collect::<Result<_>>()?,
        };
        let datasets = match raw.datasets {
            None => defaults.datasets,
            Some(list) => list
                .into_iter()
                .map(|d| match d {
                    DatasetSource::Csv {
                        name,
                        path,
                        delimiter,
                        missing_tokens,
                    } => DatasetSource::Csv {
                        name,
                        path: if path.is_relative() {
                            base_dir.join(path)
                        } else {
                            path
                        },
                        delimiter,
                        missing_tokens,
                    },
                    other => other,
                })
                .collect(),
        };
        let kmeans = raw.kmeans.unwrap_or_default();
        let cfg = ExperimentConfig {
            datasets,
            preprocessing,
            k_clusters: raw.k_clusters.unwrap_or(defaults.k_clusters),
            n_runs: raw.n_runs.unwrap_or(defaults.n_runs),
            base_seed: raw.base_seed.unwrap_or(defaults.base_seed),
            kmeans: KMeansParams {
                max_iters: kmeans.max_iters.unwrap_or(defaults.kmeans.max_iters),
                tol: kmeans.tol.unwrap_or(defaults.kmeans.tol),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    k_clusters: Option<usize>,
    n_runs: Option<usize>,
    base_seed: Option<u64>,
    bins: Option<usize>,
    bin_scope: Option<BinScope>,
    preprocessing: Option<Vec<String>>,
    kmeans: Option<RawKMeans>,
    datasets: Option<Vec<DatasetSource>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKMeans {
    max_iters: Option<usize>,
    tol: Option<f64>,
}
