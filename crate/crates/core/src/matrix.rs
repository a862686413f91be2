//! Gene-expression matrices: ingestion, missing-value removal and a
//! synthetic blob generator.
//!
//! Rows are genes, columns are conditions. Values are stored row-major.

use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_bytes, write_atomic};

/// Dense genes × conditions matrix with a missing-value mask.
///
/// Missing cells hold `NaN` in `values` and `true` in the mask; every other
/// cell is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    gene_ids: Vec<String>,
    condition_ids: Vec<String>,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl ExpressionMatrix {
    /// Builds a matrix with no missing cells.
    pub fn new(
        gene_ids: Vec<String>,
        condition_ids: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::with_missing(gene_ids, condition_ids, values, missing)
    }

    pub fn with_missing(
        gene_ids: Vec<String>,
        condition_ids: Vec<String>,
        mut values: Vec<f64>,
        missing: Vec<bool>,
    ) -> Result<Self> {
        let cells = gene_ids.len() * condition_ids.len();
        if values.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                actual: values.len(),
            });
        }
        if missing.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                actual: missing.len(),
            });
        }
        check_unique(&gene_ids, Error::DuplicateGene)?;
        check_unique(&condition_ids, Error::DuplicateCondition)?;
        let n_cond = condition_ids.len();
        for (idx, (v, &m)) in values.iter_mut().zip(&missing).enumerate() {
            if m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "gene {:?}, condition {:?}: non-finite value {v}",
                    gene_ids[idx / n_cond],
                    condition_ids[idx % n_cond]
                )));
            }
        }
        Ok(Self {
            gene_ids,
            condition_ids,
            values,
            missing,
        })
    }

    /// Convenience constructor from nested rows with generated labels
    /// `g1..` and `c1..`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cond = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * n_cond);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cond {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {n_cond}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(
            (1..=rows.len()).map(|i| format!("g{i}")).collect(),
            (1..=n_cond).map(|j| format!("c{j}")).collect(),
            values,
        )
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.condition_ids.len()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn condition_ids(&self) -> &[String] {
        &self.condition_ids
    }

    /// Row-major values; missing cells are `NaN`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn row(&self, gene: usize) -> &[f64] {
        let n = self.n_conditions();
        &self.values[gene * n..(gene + 1) * n]
    }

    pub fn is_missing(&self, gene: usize, condition: usize) -> bool {
        self.missing[gene * self.n_conditions() + condition]
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn gene_index(&self, id: &str) -> Option<usize> {
        self.gene_ids.iter().position(|g| g == id)
    }

    /// Fails if any cell is missing; normalizers and clustering need a
    /// complete matrix.
    pub fn require_complete(&self) -> Result<()> {
        match self.n_missing() {
            0 => Ok(()),
            n => Err(Error::MissingValues(n)),
        }
    }

    /// Writes the matrix in the same delimited layout [`load_matrix`] reads.
    /// Missing cells are written as empty fields. Numbers use the shortest
    /// decimal text that parses back to the identical `f64`.
    pub fn to_csv(&self, delimiter: u8) -> Result<Vec<u8>> {
        csv_bytes(delimiter, |w| {
            w.write_record(
                std::iter::once("gene_id").chain(self.condition_ids.iter().map(String::as_str)),
            )?;
            for (i, g) in self.gene_ids.iter().enumerate() {
                let mut rec = Vec::with_capacity(self.n_conditions() + 1);
                rec.push(g.clone());
                for j in 0..self.n_conditions() {
                    if self.is_missing(i, j) {
                        rec.push(String::new());
                    } else {
                        rec.push(self.values[i * self.n_conditions() + j].to_string());
                    }
                }
                w.write_record(&rec)?;
            }
            Ok(())
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, delimiter: u8) -> Result<()> {
        write_atomic(path, &self.to_csv(delimiter)?)
    }
}

fn check_unique(ids: &[String], err: fn(String) -> Error) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(err(id.clone()));
        }
    }
    Ok(())
}

/// Effect of missing-value removal on a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_genes_raw: usize,
    pub n_genes_kept: usize,
    pub n_conditions: usize,
    pub n_missing_cells: usize,
}

/// Parsing options for delimited expression tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub delimiter: u8,
    /// Cell contents treated as missing. The empty field is always missing.
    pub missing_tokens: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            missing_tokens: vec!["NA".to_string()],
        }
    }
}

impl LoadOptions {
    pub fn tsv() -> Self {
        Self {
            delimiter: b'\t',
            ..Self::default()
        }
    }

    /// Picks a tab delimiter for `.tsv`/`.txt` paths and comma otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("txt") => {
                Self::tsv()
            }
            _ => Self::default(),
        }
    }

    fn is_missing(&self, cell: &str) -> bool {
        cell.is_empty() || self.missing_tokens.iter().any(|t| t == cell)
    }
}

/// Loads an expression table: one header row of condition ids, one leading
/// column of gene ids. The header's first cell is ignored.
pub fn load_matrix(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(file, opts).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_matrix<R: Read>(reader: R, opts: &LoadOptions) -> Result<ExpressionMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(opts.delimiter)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    };
    if header.len() < 2 {
        return Err(Error::Parse {
            line: line_of(&header),
            message: "header needs a label column and at least one condition".into(),
        });
    }
    let condition_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let width = header.len();

    let mut gene_ids = Vec::new();
    let mut seen = HashSet::new();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let gene = rec[0].to_string();
        if !seen.insert(gene.clone()) {
            return Err(Error::DuplicateGene(gene));
        }
        for (j, cell) in rec.iter().skip(1).enumerate() {
            if opts.is_missing(cell) {
                values.push(f64::NAN);
                missing.push(true);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    values.push(v);
                    missing.push(false);
                }
                _ => {
                    return Err(Error::NonNumeric {
                        line,
                        column: condition_ids[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        gene_ids.push(gene);
    }
    ExpressionMatrix::with_missing(gene_ids, condition_ids, values, missing)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<input>", io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Keeps only genes with no missing cell, preserving order.
pub fn drop_incomplete_genes(m: &ExpressionMatrix) -> Result<(ExpressionMatrix, DatasetSummary)> {
    let n_cond = m.n_conditions();
    let keep: Vec<usize> = (0..m.n_genes())
        .filter(|&i| !m.missing[i * n_cond..(i + 1) * n_cond].iter().any(|&x| x))
        .collect();
    if keep.is_empty() {
        return Err(Error::NoCompleteGenes);
    }
    let mut values = Vec::with_capacity(keep.len() * n_cond);
    for &i in &keep {
        values.extend_from_slice(m.row(i));
    }
    let summary = DatasetSummary {
        n_genes_raw: m.n_genes(),
        n_genes_kept: keep.len(),
        n_conditions: n_cond,
        n_missing_cells: m.n_missing(),
    };
    let out = ExpressionMatrix {
        gene_ids: keep.iter().map(|&i| m.gene_ids[i].clone()).collect(),
        condition_ids: m.condition_ids.clone(),
        missing: vec![false; values.len()],
        values,
    };
    Ok((out, summary))
}

/// Spacing between adjacent expression levels of blob centres.
pub const BLOB_LEVEL_STEP: f64 = 10.0;

/// Number of distinct expression levels a centre coordinate can take.
const CENTRE_LEVELS: usize = 4;

/// Level `l` sits at `(l - 1.25) * step`: two negative and two positive
/// levels, none at zero, with a positive mean when levels are balanced.
const LEVEL_OFFSET: f64 = 1.25;

/// Parameters of [`synthesize_blobs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_genes: usize,
    pub n_conditions: usize,
    pub k_true: usize,
    /// Per-coordinate standard deviation of each blob.
    pub spread: f64,
    pub seed: u64,
}

/// Isotropic Gaussian blobs around `k_true` centre profiles.
///
/// Each centre coordinate is one of four levels `(l - 1.25) * step`,
/// `step = max(BLOB_LEVEL_STEP, 2 * spread)`. The level grid is drawn so that
/// every centre changes level between adjacent conditions, each condition
/// uses the four levels as evenly as `k_true` allows, and centres are
/// distinct whenever the condition count permits. Distinct centres are at
/// least `step` apart. Gene `i` belongs to blob `i % k_true`.
///
/// Randomness comes from ChaCha8 seeded with `seed` and `rand_distr`'s
/// standard normal sampler, both platform independent.
pub fn synthesize_blobs(spec: &BlobSpec) -> Result<(ExpressionMatrix, Vec<usize>)> {
    let BlobSpec {
        n_genes,
        n_conditions,
        k_true,
        spread,
        seed,
    } = *spec;
    if k_true == 0 {
        return Err(Error::param("k_true must be at least 1"));
    }
    if n_genes < k_true {
        return Err(Error::param(format!(
            "n_genes ({n_genes}) must be at least k_true ({k_true})"
        )));
    }
    if n_conditions == 0 {
        return Err(Error::param("n_conditions must be at least 1"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::param(format!(
            "spread must be positive, got {spread}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = centre_levels(k_true, n_conditions, &mut rng);
    let step = BLOB_LEVEL_STEP.max(2.0 * spread);
    let mut values = Vec::with_capacity(n_genes * n_conditions);
    let mut labels = Vec::with_capacity(n_genes);
    for i in 0..n_genes {
        let blob = i % k_true;
        for &l in &levels[blob * n_conditions..(blob + 1) * n_conditions] {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(step * (f64::from(l) - LEVEL_OFFSET) + spread * z);
        }
        labels.push(blob);
    }
    let m = ExpressionMatrix::new(
        (1..=n_genes).map(|i| format!("gene{i}")).collect(),
        (1..=n_conditions).map(|j| format!("cond{j}")).collect(),
        values,
    )?;
    Ok((m, labels))
}

/// `k × m` grid of centre levels, row-major.
fn centre_levels(k: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    const ATTEMPTS: usize = 64;
    let mut grid = Vec::new();
    for _ in 0..ATTEMPTS {
        grid = vec![0u8; k * m];
        for t in 0..m {
            let col = loop {
                let mut col = balanced_column(k, rng);
                if t == 0 || separate_from(&mut col, |i| grid[i * m + t - 1]) {
                    break col;
                }
            };
            for (i, l) in col.into_iter().enumerate() {
                grid[i * m + t] = l;
            }
        }
        let distinct: HashSet<&[u8]> = grid.chunks(m).collect();
        if distinct.len() == k {
            break;
        }
    }
    grid
}

/// Shuffled levels with counts differing by at most one; which levels get
/// the extra count is random.
fn balanced_column(k: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut extra: Vec<u8> = (0..CENTRE_LEVELS as u8).collect();
    extra.shuffle(rng);
    let mut col = Vec::with_capacity(k);
    for l in 0..CENTRE_LEVELS as u8 {
        col.extend(std::iter::repeat_n(l, k / CENTRE_LEVELS));
    }
    col.extend_from_slice(&extra[..k % CENTRE_LEVELS]);
    col.shuffle(rng);
    col
}

/// Swaps entries so that no `col[i]` equals `prev(i)`. Returns false if some
/// conflict could not be repaired.
fn separate_from(col: &mut [u8], prev: impl Fn(usize) -> u8) -> bool {
    for i in 0..col.len() {
        if col[i] != prev(i) {
            continue;
        }
        match (0..col.len()).find(|&j| col[j] != prev(i) && col[i] != prev(j)) {
            Some(j) => col.swap(i, j),
            None => return false,
        }
    }
    true
}
