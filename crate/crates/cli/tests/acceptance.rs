//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Every reference value is recomputed here from first principles; nothing
//! below calls the library's own oracles.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use genecluster::cluster::{ccia_init, kmeans, random_init, KMeansParams, Points};
use genecluster::harness::{
    run_experiment, DatasetSource, ExperimentConfig, Preprocessing, DEFAULT_SPREAD,
};
use genecluster::matrix::{
    drop_incomplete_genes, load_matrix, synthesize_blobs, BlobSpec, LoadOptions,
};
use genecluster::preprocess::{
    column_mean_normalize, minmax_normalize, row_unit_normalize, zscore_normalize, BinScope,
    Pipeline,
};
use genecluster::silhouette::silhouette;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn reference_silhouette(rows: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
    let n = rows.len();
    let k = labels.iter().max().unwrap() + 1;
    (0..n)
        .map(|i| {
            let own_size = labels.iter().filter(|&&c| c == labels[i]).count();
            if own_size == 1 {
                return 0.0;
            }
            let mut a = 0.0;
            let mut b = f64::INFINITY;
            for c in 0..k {
                let others: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == c).collect();
                if others.is_empty() {
                    continue;
                }
                let mean = others
                    .iter()
                    .map(|&j| dist(&rows[i], &rows[j]))
                    .sum::<f64>()
                    / others.len() as f64;
                if c == labels[i] {
                    a = mean;
                } else {
                    b = b.min(mean);
                }
            }
            if a.max(b) == 0.0 {
                0.0
            } else {
                (b - a) / a.max(b)
            }
        })
        .collect()
}

fn silhouette_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(2..=200);
        let k = rng.random_range(2..=12);
        let dim = rng.random_range(1..=8);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        if labels.iter().all(|&c| c == labels[0]) {
            continue;
        }
        let got = silhouette(&Points::from_rows(&rows).unwrap(), &labels, k)
            .map_err(|e| e.to_string())?;
        let want = reference_silhouette(&rows, &labels);
        for (g, w) in got.per_point.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("100 instances, max |diff| = {worst:.1e}, {secs:.2}s");
    if worst <= 1e-12 && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn partition_sse(rows: &[Vec<f64>], labels: &[usize], k: usize) -> (f64, Vec<Option<Vec<f64>>>) {
    let dim = rows[0].len();
    let mut means = Vec::with_capacity(k);
    let mut sse = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = rows
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(r, _)| r)
            .collect();
        if members.is_empty() {
            means.push(None);
            continue;
        }
        let mean: Vec<f64> = (0..dim)
            .map(|d| members.iter().map(|r| r[d]).sum::<f64>() / members.len() as f64)
            .collect();
        sse += members.iter().map(|r| dist(r, &mean).powi(2)).sum::<f64>();
        means.push(Some(mean));
    }
    (sse, means)
}

fn kmeans_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let exact = KMeansParams {
        max_iters: 1000,
        tol: 0.0,
    };
    let mut runs = 0;
    for n in 1..=8usize {
        for k in 1..=3.min(n) {
            // every labelling of n points with k labels
            let labellings: Vec<Vec<usize>> = (0..k.pow(n as u32))
                .map(|mut code| {
                    (0..n)
                        .map(|_| {
                            let l = code % k;
                            code /= k;
                            l
                        })
                        .collect()
                })
                .collect();
            for _ in 0..5 {
                let dim = rng.random_range(1..=3);
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
                    .collect();
                let points = Points::from_rows(&rows).unwrap();
                let optimum = labellings
                    .iter()
                    .map(|l| partition_sse(&rows, l, k).0)
                    .fold(f64::INFINITY, f64::min);
                let mut inits: Vec<_> = (0..4)
                    .map(|s| random_init(&points, k, s).unwrap())
                    .collect();
                inits.extend(ccia_init(&points, k));
                for init in inits {
                    let r = kmeans(&points, &init, &exact).map_err(|e| e.to_string())?;
                    let (oracle_sse, means) = partition_sse(&rows, &r.assignments, k);
                    if (r.sse - oracle_sse).abs() > 1e-9 {
                        return Err(format!("n={n} k={k}: sse {} vs oracle {oracle_sse}", r.sse));
                    }
                    if r.sse < optimum - 1e-9 {
                        return Err(format!("n={n} k={k}: sse below exhaustive optimum"));
                    }
                    for (i, row) in rows.iter().enumerate() {
                        let own = dist(row, means[r.assignments[i]].as_ref().unwrap());
                        let closer = means.iter().flatten().any(|m| dist(row, m) < own - 1e-9);
                        if closer {
                            return Err(format!("n={n} k={k}: point {i} not at a fixed point"));
                        }
                    }
                    runs += 1;
                }
            }
        }
    }
    Ok(format!(
        "{runs} runs across n <= 8, K <= 3, all fixed points, sse within 1e-9"
    ))
}

fn lloyd_monotonicity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for run in 0..1000u64 {
        let n = rng.random_range(10..150);
        let k = rng.random_range(2..=12.min(n));
        let dim = rng.random_range(1..=6);
        let data: Vec<f64> = (0..n * dim)
            .map(|_| rng.random_range(-10.0..10.0))
            .collect();
        let points = Points::new(data, dim).unwrap();
        let init = random_init(&points, k, run).map_err(|e| e.to_string())?;
        let r = kmeans(&points, &init, &KMeansParams::default()).map_err(|e| e.to_string())?;
        violations += r
            .sse_history
            .windows(2)
            .filter(|w| w[1] > w[0] + 1e-9)
            .count();
    }
    let detail = format!("1000 runs, {violations} increases");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ccia_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = BlobSpec {
        n_genes: 500,
        n_conditions: 17,
        k_true: 12,
        spread: DEFAULT_SPREAD,
        seed: 7,
    };
    let input = dir.path().join("m.csv");
    synthesize_blobs(&spec)
        .unwrap()
        .0
        .write_csv(&input, b',')
        .unwrap();
    let mut first: Option<Vec<u8>> = None;
    for run in 0..10 {
        let out = dir.path().join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_genecluster"))
            .args(["cluster", "--init", "ccia", "--k", "12", "--input"])
            .arg(&input)
            .arg("--output-dir")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("run {run} exited with {:?}", status.status.code()));
        }
        let bytes = std::fs::read(out.join("assignments.csv")).map_err(|e| e.to_string())?;
        match &first {
            None => first = Some(bytes),
            Some(f) if *f != bytes => return Err(format!("run {run} differs from run 0")),
            Some(_) => {}
        }
    }
    Ok("10 invocations, byte-identical assignments.csv".into())
}

fn ccia_hand_trace() -> Verdict {
    let points = Points::new(vec![0.0, 1.0, 10.0, 11.0], 1).unwrap();
    let init = ccia_init(&points, 2).map_err(|e| e.to_string())?;
    let r = kmeans(&points, &init, &KMeansParams::default()).map_err(|e| e.to_string())?;
    let seeded: Vec<f64> = init.centroids.as_slice().to_vec();
    let fitted: Vec<f64> = r.centroids.centroids.as_slice().to_vec();
    let detail = format!("seed centroids {seeded:?}, final {fitted:?}");
    if seeded == [0.5, 10.5] && fitted == [0.5, 10.5] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trend() -> Verdict {
    let start = Instant::now();
    // truncating a 2882-gene draw keeps its first 500 genes unchanged
    let full = BlobSpec {
        n_genes: 2882,
        n_conditions: 17,
        k_true: 12,
        spread: DEFAULT_SPREAD,
        seed: 0,
    };
    let short = BlobSpec {
        n_genes: 500,
        ..full
    };
    let (a, _) = synthesize_blobs(&full).unwrap();
    let (b, _) = synthesize_blobs(&short).unwrap();
    if a.values()[..500 * 17] != *b.values() {
        return Err("500-gene draw is not a prefix of the 2882-gene draw".into());
    }

    let (mut wins, mut cells) = (0, 0);
    for seed in 0..20 {
        let cfg = ExperimentConfig {
            datasets: vec![DatasetSource::synthetic(
                "yeast-500",
                BlobSpec { seed, ..short },
            )],
            preprocessing: Preprocessing::all(4, BinScope::Global),
            k_clusters: 12,
            n_runs: 10,
            base_seed: 0,
            kmeans: KMeansParams::default(),
        };
        let t = run_experiment(&cfg).map_err(|e| e.to_string())?.trend();
        wins += t.wins;
        cells += 5;
    }
    let secs = start.elapsed().as_secs_f64();
    let share = wins as f64 / cells as f64;
    let detail = format!(
        "seeded >= best-of-10 in {wins}/{cells} cells ({:.0}%), {secs:.1}s",
        share * 100.0
    );
    if share >= 0.8 && secs < 120.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn preprocessing_postconditions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..1000 {
        let g = rng.random_range(2..30);
        let c = rng.random_range(2..20);
        let signed: Vec<Vec<f64>> = (0..g)
            .map(|_| (0..c).map(|_| rng.random_range(-100.0..100.0)).collect())
            .collect();
        let positive: Vec<Vec<f64>> = signed
            .iter()
            .map(|r| r.iter().map(|x| x + 100.5).collect())
            .collect();
        let m = genecluster::matrix::ExpressionMatrix::from_rows(&signed).unwrap();
        let p = genecluster::matrix::ExpressionMatrix::from_rows(&positive).unwrap();
        let fail = |what: &str| Err(format!("matrix {case}: {what}"));

        let z = zscore_normalize(&m).map_err(|e| e.to_string())?;
        for i in 0..g {
            let r = z.row(i);
            let mu = r.iter().sum::<f64>() / c as f64;
            let sd = (r.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / c as f64).sqrt();
            if mu.abs() >= 1e-9 || (sd - 1.0).abs() >= 1e-9 {
                return fail("z-score row");
            }
        }
        let mm = minmax_normalize(&m, 0.0, 1.0).map_err(|e| e.to_string())?;
        for i in 0..g {
            let r = mm.row(i);
            let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo.abs() > 1e-12 || (hi - 1.0).abs() > 1e-12 {
                return fail("min-max endpoints");
            }
        }
        let cm = column_mean_normalize(&p).map_err(|e| e.to_string())?;
        for j in 0..c {
            if (cm.column(j).sum::<f64>() / g as f64 - 1.0).abs() > 1e-12 {
                return fail("column mean");
            }
        }
        let ru = row_unit_normalize(&m).map_err(|e| e.to_string())?;
        for i in 0..g {
            if (ru.row(i).iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() > 1e-12 {
                return fail("row norm");
            }
        }
        let bins = rng.random_range(1..10);
        let pipelines = [
            (Pipeline::Method1, vec![-1, 0, 1]),
            (Pipeline::Method2, vec![1, 2, 3, 4]),
            (
                Pipeline::Method3 {
                    bins,
                    scope: BinScope::Global,
                },
                (1..=bins as i32).collect(),
            ),
            (Pipeline::Method4, vec![-1, 0, 1]),
        ];
        for (pipe, alphabet) in pipelines {
            let input = if matches!(pipe, Pipeline::Method3 { .. }) {
                &p
            } else {
                &m
            };
            let dm = pipe.run(input).map_err(|e| e.to_string())?;
            if dm.codes.len() != g * c || dm.codes.iter().any(|x| !alphabet.contains(x)) {
                return fail(&format!("{pipe:?} alphabet"));
            }
        }
    }
    Ok("1000 random matrices, all four normalizations and discretizers".into())
}

fn missing_value_protocol() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("yeast.csv");
    let mut text = String::from("gene_id");
    for j in 0..17 {
        text.push_str(&format!(",t{j}"));
    }
    text.push('\n');
    for i in 0..2884 {
        text.push_str(&format!("ORF{i}"));
        for j in 0..17 {
            match (i, j) {
                (17, 4) | (1500, 0) => text.push_str(",NA"),
                _ => text.push_str(&format!(",{}", ((i * 31 + j * 7) % 97) as f64 / 10.0)),
            }
        }
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|e| e.to_string())?;
    let raw = load_matrix(&path, &LoadOptions::default()).map_err(|e| e.to_string())?;
    let (m, _) = drop_incomplete_genes(&raw).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} x {} -> {} x {}",
        raw.n_genes(),
        raw.n_conditions(),
        m.n_genes(),
        m.n_conditions()
    );
    if (m.n_genes(), m.n_conditions()) == (2882, 17) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scale() -> Verdict {
    let spec = BlobSpec {
        n_genes: 7129,
        n_conditions: 34,
        k_true: 12,
        spread: DEFAULT_SPREAD,
        seed: 4,
    };
    let (m, _) = synthesize_blobs(&spec).unwrap();
    let start = Instant::now();
    let codes = Pipeline::Method3 {
        bins: 4,
        scope: BinScope::Global,
    }
    .run(&m)
    .map_err(|e| e.to_string())?;
    let points = Points::try_from(&codes).map_err(|e| e.to_string())?;
    let init = ccia_init(&points, 12).map_err(|e| e.to_string())?;
    let r = kmeans(&points, &init, &KMeansParams::default()).map_err(|e| e.to_string())?;
    let s = silhouette(&points, &r.assignments, 12).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "7129 x 34 in {:.1}s, silhouette {:.4}",
        elapsed.as_secs_f64(),
        s.overall_mean
    );
    if elapsed < Duration::from_secs(60) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "silhouette matches brute-force reference",
            silhouette_oracle,
        ),
        ("k-means matches exhaustive partition oracle", kmeans_oracle),
        ("lloyd sse is non-increasing", lloyd_monotonicity),
        ("ccia cluster runs are byte-identical", ccia_determinism),
        ("ccia hand trace [0,1,10,11]", ccia_hand_trace),
        ("seeded vs random trend", trend),
        (
            "preprocessing post-conditions",
            preprocessing_postconditions,
        ),
        (
            "missing-value protocol 2884 -> 2882",
            missing_value_protocol,
        ),
        ("full pipeline at 7129 x 34", scale),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
