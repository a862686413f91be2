//! Normalization and discretization pipelines.
//!
//! | Method | Normalizer                    | Codes            |
//! |--------|-------------------------------|------------------|
//! | I      | per-gene z-score              | sign / delta, {-1, 0, 1} |
//! | II     | per-gene min-max to [0, 1]    | quartile bins, {1..4}    |
//! | III    | per-column mean scaling       | equal-width bins, {1..k} |
//! | IV     | per-gene unit Euclidean norm  | sign, {-1, 0, 1}         |
//!
//! Normalizers require a complete matrix (see
//! [`drop_incomplete_genes`](crate::matrix::drop_incomplete_genes)).

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_bytes, write_atomic};
use crate::matrix::ExpressionMatrix;

/// Rows at or above this many cells are processed in parallel.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Scheme {
    ZScore,
    MinMax { new_min: f64, new_max: f64 },
    ColumnMean,
    RowUnit,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::ZScore => f.write_str("z-score"),
            Scheme::MinMax { new_min, new_max } => write!(f, "min-max[{new_min}, {new_max}]"),
            Scheme::ColumnMean => f.write_str("column-mean"),
            Scheme::RowUnit => f.write_str("row-unit"),
        }
    }
}

/// A real matrix after one of the normalization schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub gene_ids: Vec<String>,
    pub condition_ids: Vec<String>,
    /// Row-major, `n_genes * n_conditions`.
    pub values: Vec<f64>,
    pub scheme: Scheme,
}

impl NormalizedMatrix {
    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.condition_ids.len()
    }

    pub fn row(&self, gene: usize) -> &[f64] {
        let n = self.n_conditions();
        &self.values[gene * n..(gene + 1) * n]
    }

    pub fn column(&self, cond: usize) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .skip(cond)
            .step_by(self.n_conditions().max(1))
            .copied()
    }

    fn require_scheme(&self, ok: bool, method: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{method} cannot discretize a {} normalized matrix",
                self.scheme
            )))
        }
    }
}

/// Range over which Method III picks `v_min` / `v_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinScope {
    #[default]
    Global,
    PerColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// z-score then sign of the first condition and direction of change
    /// between adjacent conditions.
    SignDelta,
    /// min-max to [0, 1] then four quartile bins.
    Quartile,
    /// column-mean scaling then `bins` equal-width bins.
    EqualWidth { bins: usize, scope: BinScope },
    /// unit row norm then sign.
    UnitSign,
}

impl Method {
    pub fn alphabet(&self) -> Vec<i32> {
        match *self {
            Method::SignDelta | Method::UnitSign => vec![-1, 0, 1],
            Method::Quartile => vec![1, 2, 3, 4],
            Method::EqualWidth { bins, .. } => (1..=bins as i32).collect(),
        }
    }

    /// Roman-numeral method number used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            Method::SignDelta => "I",
            Method::Quartile => "II",
            Method::EqualWidth { .. } => "III",
            Method::UnitSign => "IV",
        }
    }
}

/// Integer regulation codes, one row per gene.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedMatrix {
    pub gene_ids: Vec<String>,
    pub condition_ids: Vec<String>,
    pub codes: Vec<i32>,
    pub alphabet: Vec<i32>,
    pub method: Method,
}

impl DiscretizedMatrix {
    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.condition_ids.len()
    }

    pub fn row(&self, gene: usize) -> &[i32] {
        let n = self.n_conditions();
        &self.codes[gene * n..(gene + 1) * n]
    }

    /// Codes as reals, for clustering and silhouette evaluation.
    pub fn to_real(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| f64::from(c)).collect()
    }

    /// Same layout as the expression CSV, with integer cells.
    pub fn to_csv(&self, delimiter: u8) -> Result<Vec<u8>> {
        csv_bytes(delimiter, |w| {
            w.write_record(
                std::iter::once("gene_id").chain(self.condition_ids.iter().map(String::as_str)),
            )?;
            for (i, g) in self.gene_ids.iter().enumerate() {
                let mut rec = Vec::with_capacity(self.n_conditions() + 1);
                rec.push(g.clone());
                rec.extend(self.row(i).iter().map(i32::to_string));
                w.write_record(&rec)?;
            }
            Ok(())
        })
    }

    /// One `gene_id<TAB>pattern` line per gene.
    pub fn patterns_tsv(&self) -> String {
        let mut out = String::new();
        for (i, g) in self.gene_ids.iter().enumerate() {
            out.push_str(g);
            out.push('\t');
            out.push_str(&join_codes(self.row(i)));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, delimiter: u8) -> Result<()> {
        write_atomic(path, &self.to_csv(delimiter)?)
    }
}

fn join_codes(codes: &[i32]) -> String {
    codes
        .iter()
        .map(i32::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// The gene's codes in condition order, comma separated, e.g. `"1,-1,0"`.
pub fn pattern_string(dm: &DiscretizedMatrix, gene: &str) -> Result<String> {
    let i = dm
        .gene_ids
        .iter()
        .position(|g| g == gene)
        .ok_or_else(|| Error::UnknownGene(gene.to_string()))?;
    Ok(join_codes(dm.row(i)))
}

/// Applies `f` to each row of a row-major buffer, in parallel for large inputs.
fn map_rows<F>(values: &[f64], width: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &[f64], &mut [f64]) -> Result<()> + Sync,
{
    let mut out = vec![0.0; values.len()];
    if width == 0 {
        return Ok(out);
    }
    if values.len() >= PAR_THRESHOLD {
        // collect so the reported error is the first failing row, not a race winner
        let results: Vec<Result<()>> = out
            .par_chunks_mut(width)
            .zip(values.par_chunks(width))
            .enumerate()
            .map(|(i, (o, r))| f(i, r, o))
            .collect();
        results.into_iter().collect::<Result<()>>()?;
    } else {
        for (i, (o, r)) in out.chunks_mut(width).zip(values.chunks(width)).enumerate() {
            f(i, r, o)?;
        }
    }
    Ok(out)
}

fn normalized(m: &ExpressionMatrix, values: Vec<f64>, scheme: Scheme) -> NormalizedMatrix {
    NormalizedMatrix {
        gene_ids: m.gene_ids().to_vec(),
        condition_ids: m.condition_ids().to_vec(),
        values,
        scheme,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-gene standardization with the population mean and standard
/// deviation. Rows whose spread is zero (or below rounding noise relative to
/// their magnitude) become all zeros.
pub fn zscore_normalize(m: &ExpressionMatrix) -> Result<NormalizedMatrix> {
    m.require_complete()?;
    if m.n_conditions() < 2 {
        return Err(Error::InvalidInput(
            "z-score normalization needs at least 2 conditions".into(),
        ));
    }
    let values = map_rows(m.values(), m.n_conditions(), |_, row, out| {
        let mu = mean(row);
        let var = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / row.len() as f64;
        let sigma = var.sqrt();
        let scale = row.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if sigma <= f64::EPSILON * scale || sigma == 0.0 {
            out.fill(0.0);
        } else {
            for (o, x) in out.iter_mut().zip(row) {
                *o = (x - mu) / sigma;
            }
        }
        Ok(())
    })?;
    Ok(normalized(m, values, Scheme::ZScore))
}

/// Method I codes. The first condition gets the sign of its value; every
/// later condition gets +1 / 0 / -1 for a rise / no change / fall relative to
/// the previous condition.
pub fn discretize_method1(nm: &NormalizedMatrix) -> Result<DiscretizedMatrix> {
    nm.require_scheme(nm.scheme == Scheme::ZScore, "Method I")?;
    if nm.n_conditions() == 0 {
        return Err(Error::InvalidInput("no conditions".into()));
    }
    let mut codes = Vec::with_capacity(nm.values.len());
    for i in 0..nm.n_genes() {
        let row = nm.row(i);
        codes.push(sign(row[0]));
        for w in row.windows(2) {
            codes.push(compare(w[0], w[1]));
        }
    }
    Ok(discretized(nm, codes, Method::SignDelta))
}

fn sign(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn compare(prev: f64, next: f64) -> i32 {
    if prev < next {
        1
    } else if prev > next {
        -1
    } else {
        0
    }
}

fn discretized(nm: &NormalizedMatrix, codes: Vec<i32>, method: Method) -> DiscretizedMatrix {
    DiscretizedMatrix {
        gene_ids: nm.gene_ids.clone(),
        condition_ids: nm.condition_ids.clone(),
        codes,
        alphabet: method.alphabet(),
        method,
    }
}

/// Per-gene linear map of `[row min, row max]` onto `[new_min, new_max]`.
pub fn minmax_normalize(
    m: &ExpressionMatrix,
    new_min: f64,
    new_max: f64,
) -> Result<NormalizedMatrix> {
    m.require_complete()?;
    if !(new_min.is_finite() && new_max.is_finite() && new_min < new_max) {
        return Err(Error::param(format!(
            "min-max target range [{new_min}, {new_max}] is empty"
        )));
    }
    let span = new_max - new_min;
    let values = map_rows(m.values(), m.n_conditions(), |i, row, out| {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        if hi <= lo {
            return Err(Error::DegenerateGene {
                gene: m.gene_ids()[i].clone(),
                reason: format!("constant row ({lo}); min-max range is zero"),
            });
        }
        for (o, &x) in out.iter_mut().zip(row) {
            *o = if x == lo {
                new_min
            } else if x == hi {
                new_max
            } else {
                ((x - lo) / (hi - lo) * span + new_min).clamp(new_min, new_max)
            };
        }
        Ok(())
    })?;
    Ok(normalized(m, values, Scheme::MinMax { new_min, new_max }))
}

const UNIT_RANGE_SLACK: f64 = 1e-12;

/// Method II codes: 1 for [0, 0.25), 2 for [0.25, 0.5), 3 for [0.5, 0.75),
/// 4 for [0.75, 1].
pub fn discretize_method2(nm: &NormalizedMatrix) -> Result<DiscretizedMatrix> {
    nm.require_scheme(
        nm.scheme
            == Scheme::MinMax {
                new_min: 0.0,
                new_max: 1.0,
            },
        "Method II",
    )?;
    let mut codes = Vec::with_capacity(nm.values.len());
    for (idx, &v) in nm.values.iter().enumerate() {
        if !(-UNIT_RANGE_SLACK..=1.0 + UNIT_RANGE_SLACK).contains(&v) {
            let n = nm.n_conditions();
            return Err(Error::InvalidInput(format!(
                "gene {:?}, condition {:?}: value {v} outside [0, 1]",
                nm.gene_ids[idx / n],
                nm.condition_ids[idx % n]
            )));
        }
        codes.push(quartile(v));
    }
    Ok(discretized(nm, codes, Method::Quartile))
}

fn quartile(v: f64) -> i32 {
    if v < 0.25 {
        1
    } else if v < 0.5 {
        2
    } else if v < 0.75 {
        3
    } else {
        4
    }
}

/// Divides every column by its arithmetic mean.
pub fn column_mean_normalize(m: &ExpressionMatrix) -> Result<NormalizedMatrix> {
    m.require_complete()?;
    let n = m.n_genes();
    let width = m.n_conditions();
    let src = m.values();
    let mut means = Vec::with_capacity(width);
    for j in 0..width {
        let col = || src.iter().skip(j).step_by(width);
        let mu = col().sum::<f64>() / n as f64;
        let mag = col().map(|x| x.abs()).sum::<f64>() / n as f64;
        // A mean lost in rounding noise is treated as zero.
        if mu == 0.0 || mu.abs() <= f64::EPSILON * n as f64 * mag {
            return Err(Error::DegenerateCondition {
                condition: m.condition_ids()[j].clone(),
                reason: format!("column mean is zero ({mu})"),
            });
        }
        means.push(mu);
    }
    let values = map_rows(src, width, |_, row, out| {
        for ((o, x), mu) in out.iter_mut().zip(row).zip(&means) {
            *o = x / mu;
        }
        Ok(())
    })?;
    Ok(normalized(m, values, Scheme::ColumnMean))
}

/// Equal-width bin edges `b_i = v_min + i * width` for `i = 1..bins`.
#[derive(Debug, Clone)]
struct EqualWidthBins {
    edges: Vec<f64>,
}

impl EqualWidthBins {
    fn new(lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        Self {
            edges: (1..bins).map(|i| lo + i as f64 * width).collect(),
        }
    }

    /// 1-based bin index: left-closed, right-open, last bin closed.
    fn code(&self, v: f64) -> i32 {
        (self.edges.partition_point(|&b| b <= v) + 1) as i32
    }
}

/// Method III codes: `bins` equal-width bins of size `(v_max - v_min) / bins`.
/// `v_min` / `v_max` come from the whole matrix or from each column,
/// depending on `scope`.
pub fn discretize_method3(
    nm: &NormalizedMatrix,
    bins: usize,
    scope: BinScope,
) -> Result<DiscretizedMatrix> {
    if bins == 0 {
        return Err(Error::param("bin count must be at least 1"));
    }
    let method = Method::EqualWidth { bins, scope };
    if bins == 1 {
        return Ok(discretized(nm, vec![1; nm.values.len()], method));
    }
    let range = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        })
    };
    let width = nm.n_conditions();
    let codes = match scope {
        BinScope::Global => {
            let (lo, hi) = range(&mut nm.values.iter().copied());
            if hi <= lo {
                return Err(Error::InvalidInput(format!(
                    "matrix is constant ({lo}); cannot form {bins} bins"
                )));
            }
            let b = EqualWidthBins::new(lo, hi, bins);
            nm.values.iter().map(|&v| b.code(v)).collect()
        }
        BinScope::PerColumn => {
            let mut per_col = Vec::with_capacity(width);
            for j in 0..width {
                let (lo, hi) = range(&mut nm.column(j));
                if hi <= lo {
                    return Err(Error::DegenerateCondition {
                        condition: nm.condition_ids[j].clone(),
                        reason: format!("constant column ({lo}); cannot form {bins} bins"),
                    });
                }
                per_col.push(EqualWidthBins::new(lo, hi, bins));
            }
            nm.values
                .iter()
                .enumerate()
                .map(|(idx, &v)| per_col[idx % width].code(v))
                .collect()
        }
    };
    Ok(discretized(nm, codes, method))
}

/// Divides every gene row by its Euclidean norm.
pub fn row_unit_normalize(m: &ExpressionMatrix) -> Result<NormalizedMatrix> {
    m.require_complete()?;
    let values = map_rows(m.values(), m.n_conditions(), |i, row, out| {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateGene {
                gene: m.gene_ids()[i].clone(),
                reason: format!("row norm is {norm}"),
            });
        }
        for (o, x) in out.iter_mut().zip(row) {
            *o = x / norm;
        }
        Ok(())
    })?;
    Ok(normalized(m, values, Scheme::RowUnit))
}

/// Method IV codes: -1 for negative, +1 for positive, 0 for exactly zero.
pub fn discretize_method4(nm: &NormalizedMatrix) -> Result<DiscretizedMatrix> {
    nm.require_scheme(nm.scheme == Scheme::RowUnit, "Method IV")?;
    let codes = nm.values.iter().map(|&v| sign(v)).collect();
    Ok(discretized(nm, codes, Method::UnitSign))
}

/// One of the four full pipelines, as a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    Method1,
    Method2,
    Method3 { bins: usize, scope: BinScope },
    Method4,
}

impl Pipeline {
    pub fn run(&self, m: &ExpressionMatrix) -> Result<DiscretizedMatrix> {
        match *self {
            Pipeline::Method1 => discretize_method1(&zscore_normalize(m)?),
            Pipeline::Method2 => discretize_method2(&minmax_normalize(m, 0.0, 1.0)?),
            Pipeline::Method3 { bins, scope } => {
                discretize_method3(&column_mean_normalize(m)?, bins, scope)
            }
            Pipeline::Method4 => discretize_method4(&row_unit_normalize(m)?),
        }
    }
}
