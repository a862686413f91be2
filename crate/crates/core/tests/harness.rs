use genecluster::harness::*;
use genecluster::matrix::BlobSpec;

fn small_config(dir: &std::path::Path) -> ExperimentConfig {
    let csv = dir.join("tiny.csv");
    std::fs::write(
        &csv,
        "gene_id,a,b,c\n\
         g1,1,2,3\ng2,1.1,2.1,3.2\ng3,-9,8,-7\ng4,-9.2,8.1,-7.1\n\
         g5,4,NA,4\ng6,2,-9,2\ng7,2.1,-9.1,2.2\ng8,5,5,6\n",
    )
    .unwrap();
    let text = format!(
        r#"
k_clusters = 3
n_runs = 4
base_seed = 10
preprocessing = ["none", "method2", "method4"]

[[datasets]]
kind = "synthetic"
name = "blobs"
n_genes = 60
n_conditions = 5
k_true = 3
spread = 0.5
seed = 1

[[datasets]]
kind = "csv"
name = "tiny"
path = "{}"
"#,
        csv.file_name().unwrap().to_str().unwrap()
    );
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

#[test]
fn config_file_drives_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.cells.len(), 2 * 3 * 2);
    assert_eq!(r.datasets[1].summary.n_genes_kept, 7);
    for c in &r.cells {
        let s = c.outcome.stats().unwrap_or_else(|| panic!("{c:?}"));
        assert!((-1.0..=1.0).contains(&s.best_silhouette));
        match c.strategy {
            Strategy::KMeans => {
                assert_eq!(s.runs, 4);
                assert!(s.best_seed.is_some_and(|seed| (10..14).contains(&seed)));
            }
            Strategy::CciaKMeans => assert_eq!(s.std_silhouette, 0.0),
        }
    }

    let md = render_table(&r, TableFormat::Markdown).unwrap();
    assert_eq!(md.lines().count(), 2 + 4);
    let csv = render_table(&r, TableFormat::Csv).unwrap();
    assert!(csv.starts_with("Data Set,Methods,Actual Data set,Discretization Method-II,"));
    let svg = chart_svg(&r).unwrap();
    assert_eq!(svg.matches(r#"class="bar""#).count(), 12);
}

#[test]
fn single_run_has_zero_spread() {
    let cfg = ExperimentConfig {
        datasets: vec![DatasetSource::synthetic(
            "b",
            BlobSpec {
                n_genes: 40,
                n_conditions: 4,
                k_true: 2,
                spread: 1.0,
                seed: 0,
            },
        )],
        preprocessing: vec![Preprocessing::None, Preprocessing::Method1],
        k_clusters: 2,
        n_runs: 1,
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(r
        .cells
        .iter()
        .all(|c| c.outcome.stats().unwrap().std_silhouette == 0.0));
}

#[test]
fn identical_configs_give_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = render_table(&run_experiment(&cfg).unwrap(), TableFormat::Json).unwrap();
    let b = render_table(&run_experiment(&cfg).unwrap(), TableFormat::Json).unwrap();
    assert_eq!(a, b);
}
