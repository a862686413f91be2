//! Silhouette widths (Rousseeuw 1987) over Euclidean distance.
//!
//! For point `i` in cluster `A`, `a(i)` is its mean distance to the other
//! members of `A` and `b(i)` the smallest mean distance to the members of
//! any other non-empty cluster. `s(i) = (b - a) / max(a, b)`, with
//! `s(i) = 0` for members of singleton clusters and when `a = b = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::Points;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub per_point: Vec<f64>,
    /// Mean width per cluster; `None` for empty clusters.
    pub per_cluster_mean: Vec<Option<f64>>,
    pub overall_mean: f64,
    /// Points whose cluster has a single member.
    pub n_singletons: usize,
}

fn validate(points: &Points, assignments: &[usize], k: usize) -> Result<Vec<usize>> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(
            "silhouette needs at least two points".into(),
        ));
    }
    if assignments.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            actual: assignments.len(),
        });
    }
    if k < 2 {
        return Err(Error::param(format!("silhouette needs k >= 2, got {k}")));
    }
    let mut sizes = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        if c >= k {
            return Err(Error::InvalidInput(format!(
                "point {i} assigned to cluster {c}, but k = {k}"
            )));
        }
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::InvalidInput(
            "silhouette is undefined with fewer than two non-empty clusters".into(),
        ));
    }
    Ok(sizes)
}

fn width(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m > 0.0 {
        ((b - a) / m).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn summarize(per_point: Vec<f64>, assignments: &[usize], sizes: &[usize]) -> SilhouetteReport {
    let k = sizes.len();
    let mut sums = vec![0.0; k];
    for (&s, &c) in per_point.iter().zip(assignments) {
        sums[c] += s;
    }
    let per_cluster_mean = sums
        .iter()
        .zip(sizes)
        .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
        .collect();
    let overall_mean = per_point.iter().sum::<f64>() / per_point.len() as f64;
    let n_singletons = sizes.iter().filter(|&&n| n == 1).count();
    SilhouetteReport {
        per_point,
        per_cluster_mean,
        overall_mean,
        n_singletons,
    }
}

/// Silhouette report for a partition of `points` into `k` labelled clusters.
///
/// One pass per point accumulates distance sums for every cluster at once,
/// parallel across points.
pub fn silhouette(points: &Points, assignments: &[usize], k: usize) -> Result<SilhouetteReport> {
    let sizes = validate(points, assignments, k)?;
    let per_point: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; k],
            |sums, i| {
                let own = assignments[i];
                if sizes[own] == 1 {
                    return 0.0;
                }
                sums.fill(0.0);
                let xi = points.row(i);
                for (xj, &c) in points.rows().zip(assignments) {
                    sums[c] += crate::cluster::sq_dist(xi, xj).sqrt();
                }
                let a = sums[own] / (sizes[own] - 1) as f64;
                let b = sums
                    .iter()
                    .zip(&sizes)
                    .enumerate()
                    .filter(|&(c, (_, &n))| c != own && n > 0)
                    .map(|(_, (&s, &n))| s / n as f64)
                    .fold(f64::INFINITY, f64::min);
                width(a, b)
            },
        )
        .collect();
    Ok(summarize(per_point, assignments, &sizes))
}

/// Literal triple-loop reference for [`silhouette`], used as a test oracle.
/// Shares no distance or accumulation code with the optimized path.
pub fn silhouette_bruteforce(
    points: &Points,
    assignments: &[usize],
    k: usize,
) -> Result<SilhouetteReport> {
    let sizes = validate(points, assignments, k)?;
    let n = points.len();
    let mut per_point = Vec::with_capacity(n);
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            per_point.push(0.0);
            continue;
        }
        let mut mean_to = vec![f64::NAN; k];
        for (c, slot) in mean_to.iter_mut().enumerate() {
            if sizes[c] == 0 {
                continue;
            }
            let mut total = 0.0;
            let mut count = 0usize;
            for (j, &label) in assignments.iter().enumerate() {
                if label != c || j == i {
                    continue;
                }
                let mut acc = 0.0;
                for d in 0..points.dim() {
                    let diff = points.row(i)[d] - points.row(j)[d];
                    acc += diff * diff;
                }
                total += acc.sqrt();
                count += 1;
            }
            *slot = total / count as f64;
        }
        let a = mean_to[own];
        let mut b = f64::INFINITY;
        for (c, &m) in mean_to.iter().enumerate() {
            if c != own && sizes[c] > 0 && m < b {
                b = m;
            }
        }
        let s = if a.max(b) == 0.0 {
            0.0
        } else {
            (b - a) / a.max(b)
        };
        per_point.push(s);
    }
    Ok(summarize(per_point, assignments, &sizes))
}
