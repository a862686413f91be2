use std::collections::{HashMap, HashSet};
use std::path::Path;

use genecluster::cluster::{
    ccia_init, kmeans, random_init, ClusteringResult, KMeansParams, Points, StopReason,
};
use genecluster::harness::{
    render_chart, render_table, run_experiment, ExperimentConfig, Preprocessing, TableFormat,
};
use genecluster::io::write_atomic;
use genecluster::matrix::{
    drop_incomplete_genes, load_matrix, synthesize_blobs, BlobSpec, ExpressionMatrix, LoadOptions,
};
use genecluster::silhouette::silhouette as silhouette_report;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::failure::Failure;
use crate::{
    ClusterArgs, ExperimentArgs, Init, InputArgs, MethodArgs, PreprocessArgs, SilhouetteArgs,
    SynthArgs,
};

type Outcome<T = ()> = Result<T, Failure>;

fn load_options(input: &InputArgs) -> Outcome<LoadOptions> {
    let mut opts = LoadOptions::for_path(&input.input);
    if let Some(d) = input.delimiter {
        if !d.is_ascii() {
            return Err(Failure::Usage(format!(
                "delimiter must be ASCII, got {d:?}"
            )));
        }
        opts.delimiter = d as u8;
    }
    Ok(opts)
}

/// Raw matrix and its complete-gene subset.
fn load(input: &InputArgs) -> Outcome<(ExpressionMatrix, ExpressionMatrix)> {
    let raw = load_matrix(&input.input, &load_options(input)?).map_err(Failure::data)?;
    let (m, summary) = drop_incomplete_genes(&raw).map_err(Failure::data)?;
    if summary.n_genes_kept < summary.n_genes_raw {
        eprintln!(
            "dropped {} of {} genes with missing values; {} x {} remain",
            summary.n_genes_raw - summary.n_genes_kept,
            summary.n_genes_raw,
            summary.n_genes_kept,
            summary.n_conditions
        );
    }
    Ok((raw, m))
}

fn parse_method(name: &str, args: &MethodArgs) -> Outcome<Preprocessing> {
    if args.bins == 0 {
        return Err(Failure::Usage("--bins must be at least 1".into()));
    }
    Preprocessing::parse(name, args.bins, args.scope.into()).map_err(Failure::data)
}

fn output_dir(dir: &Path) -> Outcome<&Path> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    write_atomic(path, bytes).map_err(Failure::runtime)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Failure::runtime)?;
    bytes.push(b'\n');
    write(path, &bytes)
}

fn write_records<I, R>(path: &Path, header: &[&str], rows: I) -> Outcome
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(Failure::runtime)?;
    for r in rows {
        w.write_record(r).map_err(Failure::runtime)?;
    }
    let bytes = w.into_inner().map_err(Failure::runtime)?;
    write(path, &bytes)
}

pub fn preprocess(a: PreprocessArgs) -> Outcome {
    let pre = parse_method(&a.method, &a.method_args)?;
    let Some(pipeline) = pre.pipeline() else {
        return Err(Failure::Usage("--method must be 1, 2, 3 or 4".into()));
    };
    let (raw, m) = load(&a.input)?;
    let dm = pipeline.run(&m).map_err(Failure::data)?;
    let dir = output_dir(&a.output_dir)?;

    write(
        &dir.join("codes.csv"),
        &dm.to_csv(b',').map_err(Failure::runtime)?,
    )?;
    write(&dir.join("patterns.tsv"), dm.patterns_tsv().as_bytes())?;
    let params = match pre {
        Preprocessing::Method3 { bins, scope } => json!({ "bins": bins, "scope": scope }),
        _ => json!({}),
    };
    let meta = json!({
        "method": dm.method.label(),
        "pipeline": pre.to_string(),
        "parameters": params,
        "alphabet": dm.alphabet,
        "input": a.input.input,
        "n_genes_raw": raw.n_genes(),
        "n_genes": dm.n_genes(),
        "n_conditions": dm.n_conditions(),
    });
    write_json(&dir.join("codes.meta.json"), &meta)
}

#[derive(Serialize)]
struct ClusteringRecord<'a> {
    strategy_tag: &'static str,
    seed: Option<u64>,
    preprocessing: String,
    k: usize,
    sse: f64,
    iterations: usize,
    converged: bool,
    stop_reason: StopReason,
    empty_reseeds: usize,
    sse_history: &'a [f64],
    assignments: &'a [usize],
    centroids: Vec<&'a [f64]>,
}

fn record<'a>(r: &'a ClusteringResult, pre: Preprocessing) -> ClusteringRecord<'a> {
    ClusteringRecord {
        strategy_tag: r.centroids.strategy.tag(),
        seed: r.centroids.strategy.seed(),
        preprocessing: pre.to_string(),
        k: r.centroids.k(),
        sse: r.sse,
        iterations: r.iterations,
        converged: r.converged,
        stop_reason: r.stop_reason,
        empty_reseeds: r.empty_reseeds,
        sse_history: &r.sse_history,
        assignments: &r.assignments,
        centroids: r.centroids.centroids.rows().collect(),
    }
}

fn write_assignments(path: &Path, genes: &[String], assignments: &[usize]) -> Outcome {
    write_records(
        path,
        &["gene_id", "cluster"],
        genes
            .iter()
            .zip(assignments)
            .map(|(g, c)| [g.clone(), c.to_string()]),
    )
}

pub fn cluster(a: ClusterArgs) -> Outcome {
    if a.k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    if a.runs == 0 {
        return Err(Failure::Usage("--runs must be at least 1".into()));
    }
    if a.tol.is_nan() || a.tol < 0.0 {
        return Err(Failure::Usage("--tol must be nonnegative".into()));
    }
    let pre = parse_method(&a.method, &a.method_args)?;
    let (_, m) = load(&a.input)?;
    if a.k > m.n_genes() {
        return Err(Failure::Data(format!(
            "k = {} exceeds the number of complete genes ({})",
            a.k,
            m.n_genes()
        )));
    }
    let points = pre.apply(&m).map_err(Failure::data)?;
    let params = KMeansParams {
        max_iters: a.max_iters,
        tol: a.tol,
    };
    let dir = output_dir(&a.output_dir)?;
    let genes = m.gene_ids();

    let results: Vec<ClusteringResult> = match a.init {
        Init::Ccia => {
            if a.runs > 1 {
                eprintln!("ccia seeding is deterministic; running once");
            }
            let init = ccia_init(&points, a.k).map_err(Failure::data)?;
            vec![kmeans(&points, &init, &params).map_err(Failure::data)?]
        }
        Init::Random => (0..a.runs as u64)
            .into_par_iter()
            .map(|r| run_random(&points, a.k, a.seed + r, &params))
            .collect::<Outcome<_>>()?,
    };

    // lowest SSE, earliest run on ties
    let best = results
        .iter()
        .enumerate()
        .min_by(|(i, x), (j, y)| x.sse.total_cmp(&y.sse).then(i.cmp(j)))
        .map(|(i, _)| i)
        .expect("at least one run");

    if results.len() > 1 {
        let runs_dir = dir.join("runs");
        output_dir(&runs_dir)?;
        let mut index = Vec::with_capacity(results.len());
        for r in &results {
            let seed = r.centroids.strategy.seed().unwrap_or_default();
            let json_name = format!("run-{seed}.json");
            let csv_name = format!("assignments-{seed}.csv");
            write_json(&runs_dir.join(&json_name), &record(r, pre))?;
            write_assignments(&runs_dir.join(&csv_name), genes, &r.assignments)?;
            index.push(json!({
                "seed": seed,
                "sse": r.sse,
                "clustering": format!("runs/{json_name}"),
                "assignments": format!("runs/{csv_name}"),
            }));
        }
        let b = &results[best];
        let seed = b.centroids.strategy.seed().unwrap_or_default();
        write_json(
            &dir.join("best.json"),
            &json!({
                "criterion": "sse",
                "best_seed": seed,
                "best_sse": b.sse,
                "clustering": format!("runs/run-{seed}.json"),
                "assignments": format!("runs/assignments-{seed}.csv"),
                "runs": index,
            }),
        )?;
    }

    let b = &results[best];
    write_json(&dir.join("clustering.json"), &record(b, pre))?;
    write_assignments(&dir.join("assignments.csv"), genes, &b.assignments)?;
    let seed = b
        .centroids
        .strategy
        .seed()
        .map_or_else(String::new, |s| format!(" seed={s}"));
    println!(
        "init={}{seed} k={} sse={:.4} iterations={} converged={}",
        b.centroids.strategy.tag(),
        a.k,
        b.sse,
        b.iterations,
        b.converged
    );
    Ok(())
}

fn run_random(
    points: &Points,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Outcome<ClusteringResult> {
    let init = random_init(points, k, seed).map_err(Failure::data)?;
    kmeans(points, &init, params).map_err(Failure::data)
}

/// `gene_id -> cluster` in file order.
fn read_assignments(path: &Path) -> Outcome<Vec<(String, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(id), Some(label)) = (rec.get(0), rec.get(1)) else {
            return Err(Failure::Data(format!(
                "{} line {line}: expected gene_id and cluster",
                path.display()
            )));
        };
        let label: usize = label.parse().map_err(|_| {
            Failure::Data(format!(
                "{} line {line}: cluster {label:?} is not a nonnegative integer",
                path.display()
            ))
        })?;
        if !seen.insert(id.to_string()) {
            return Err(Failure::Data(format!(
                "{} line {line}: duplicate gene id {id:?}",
                path.display()
            )));
        }
        out.push((id.to_string(), label));
    }
    Ok(out)
}

pub fn silhouette(a: SilhouetteArgs) -> Outcome {
    let pre = parse_method(&a.method, &a.method_args)?;
    let (raw, m) = load(&a.input)?;
    let labelled = read_assignments(&a.assignments)?;
    let by_id: HashMap<&str, usize> = labelled.iter().map(|(g, c)| (g.as_str(), *c)).collect();

    let mut assignments = Vec::with_capacity(m.n_genes());
    for g in m.gene_ids() {
        match by_id.get(g.as_str()) {
            Some(&c) => assignments.push(c),
            None => {
                return Err(Failure::Data(format!(
                    "gene id mismatch: {g:?} in {} has no row in {}",
                    a.input.input.display(),
                    a.assignments.display()
                )))
            }
        }
    }
    let kept: HashSet<&str> = m.gene_ids().iter().map(String::as_str).collect();
    let dropped: HashSet<&str> = raw.gene_ids().iter().map(String::as_str).collect();
    if let Some((g, _)) = labelled
        .iter()
        .find(|(g, _)| !kept.contains(g.as_str()) && !dropped.contains(g.as_str()))
    {
        return Err(Failure::Data(format!(
            "gene id mismatch: {g:?} in {} is not in {}",
            a.assignments.display(),
            a.input.input.display()
        )));
    }

    let k = assignments.iter().max().map_or(0, |&c| c + 1);
    let points = pre.apply(&m).map_err(Failure::data)?;
    let report = silhouette_report(&points, &assignments, k).map_err(Failure::data)?;

    let dir = output_dir(&a.output_dir)?;
    write_json(&dir.join("silhouette.json"), &report)?;
    write_records(
        &dir.join("silhouette.csv"),
        &["gene_id", "cluster", "s_value"],
        m.gene_ids()
            .iter()
            .zip(&assignments)
            .zip(&report.per_point)
            .map(|((g, c), s)| [g.clone(), c.to_string(), s.to_string()]),
    )?;
    println!("{:.4}", report.overall_mean);
    Ok(())
}

pub fn experiment(a: ExperimentArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            genecluster::Error::Io { .. } => Failure::Usage(e.to_string()),
            other => Failure::data(other),
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = a.k {
        cfg.k_clusters = k;
    }
    if let Some(r) = a.runs {
        cfg.n_runs = r;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    cfg.validate().map_err(Failure::data)?;

    let result = run_experiment(&cfg).map_err(Failure::data)?;
    let dir = output_dir(&a.output_dir)?;
    for (format, name) in [
        (TableFormat::Csv, "table.csv"),
        (TableFormat::Json, "table.json"),
        (TableFormat::Markdown, "table.md"),
    ] {
        let text = render_table(&result, format).map_err(Failure::runtime)?;
        write(&dir.join(name), text.as_bytes())?;
    }
    write_json(&dir.join("result.json"), &result)?;
    let chart = dir.join("chart.svg");
    render_chart(&result, &chart).map_err(Failure::runtime)?;
    eprintln!("wrote {}", chart.display());

    print!(
        "{}",
        render_table(&result, a.format).map_err(Failure::runtime)?
    );
    println!("{}", result.trend());
    for note in &result.notes {
        eprintln!("note: {note}");
    }
    match result.n_failed() {
        0 => Ok(()),
        n => Err(Failure::Runtime(format!(
            "{n} of {} cells failed; see the ERR markers in the table",
            result.cells.len()
        ))),
    }
}

pub fn synth(a: SynthArgs) -> Outcome {
    let spec = BlobSpec {
        n_genes: a.n_genes,
        n_conditions: a.n_conditions,
        k_true: a.k_true,
        spread: a.spread,
        seed: a.seed,
    };
    let (m, labels) = synthesize_blobs(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    let dir = output_dir(&a.output_dir)?;
    write(
        &dir.join("matrix.csv"),
        &m.to_csv(b',').map_err(Failure::runtime)?,
    )?;
    write_assignments(&dir.join("labels.csv"), m.gene_ids(), &labels)?;
    write_json(&dir.join("spec.json"), &spec)
}
