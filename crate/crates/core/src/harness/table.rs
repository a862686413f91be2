use serde::{Deserialize, Serialize};

use super::{CellOutcome, ExperimentResult, Strategy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(Error::param(format!(
                "unknown table format {other:?}; expected csv, json or markdown"
            ))),
        }
    }
}

/// Marker printed in place of a failed cell.
pub const ERROR_MARKER: &str = "ERR";

/// JSON shape of a rendered table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDoc {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub method: String,
    /// Best-run silhouette per column, rounded to 4 decimals; `null` on failure.
    pub values: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

fn round4(x: f64) -> f64 {
    format!("{x:.4}").parse().expect("formatted float parses")
}

fn table_doc(r: &ExperimentResult) -> TableDoc {
    let columns = r
        .preprocessing
        .iter()
        .map(|p| p.heading().to_string())
        .collect();
    let mut rows = Vec::new();
    for d in &r.datasets {
        for strategy in [Strategy::KMeans, Strategy::CciaKMeans] {
            let mut values = Vec::with_capacity(r.preprocessing.len());
            let mut errors = Vec::new();
            for &p in &r.preprocessing {
                match r.cell(&d.name, p, strategy).map(|c| &c.outcome) {
                    Some(CellOutcome::Ok(s)) => values.push(Some(round4(s.best_silhouette))),
                    Some(CellOutcome::Failed { error }) => {
                        values.push(None);
                        errors.push(format!("{}: {error}", p.heading()));
                    }
                    None => {
                        values.push(None);
                        errors.push(format!("{}: missing", p.heading()));
                    }
                }
            }
            rows.push(TableRow {
                dataset: d.name.clone(),
                method: strategy.label().to_string(),
                values,
                errors,
            });
        }
    }
    TableDoc { columns, rows }
}

fn cell_text(v: Option<f64>) -> String {
    v.map_or_else(|| ERROR_MARKER.to_string(), |x| format!("{x:.4}"))
}

/// One row per (dataset, strategy), one column per preprocessing variant,
/// best-run silhouette to 4 decimals.
pub fn render_table(r: &ExperimentResult, format: TableFormat) -> Result<String> {
    let doc = table_doc(r);
    match format {
        TableFormat::Json => Ok(serde_json::to_string_pretty(&doc)? + "\n"),
        TableFormat::Csv => {
            let bytes = crate::io::csv_bytes(b',', |w| {
                let header: Vec<&str> = ["Data Set", "Methods"]
                    .into_iter()
                    .chain(doc.columns.iter().map(String::as_str))
                    .collect();
                w.write_record(&header)?;
                for row in &doc.rows {
                    let mut rec = vec![row.dataset.clone(), row.method.clone()];
                    rec.extend(row.values.iter().map(|&v| cell_text(v)));
                    w.write_record(&rec)?;
                }
                Ok(())
            })?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Markdown => {
            let mut out = String::from("| Data Set | Methods |");
            for c in &doc.columns {
                out.push_str(&format!(" {c} |"));
            }
            out.push_str("\n|---|---|");
            out.push_str(&"---:|".repeat(doc.columns.len()));
            out.push('\n');
            let mut last = None;
            for row in &doc.rows {
                let name = if last == Some(&row.dataset) {
                    ""
                } else {
                    row.dataset.as_str()
                };
                last = Some(&row.dataset);
                out.push_str(&format!("| {name} | {} |", row.method));
                for &v in &row.values {
                    out.push_str(&format!(" {} |", cell_text(v)));
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Cell, CellStats, DatasetInfo, Preprocessing};
    use crate::matrix::DatasetSummary;
    use crate::preprocess::BinScope;

    fn stats(s: f64) -> CellOutcome {
        CellOutcome::Ok(CellStats {
            best_silhouette: s,
            mean_silhouette: s,
            std_silhouette: 0.0,
            mean_iterations: 1.0,
            runs: 1,
            best_seed: None,
            best_sse: 0.0,
            best_ari: None,
            wall_time_secs: 0.0,
        })
    }

    /// Serum block of the published comparison, typed in as a fixture.
    fn serum_fixture() -> ExperimentResult {
        let pre = Preprocessing::all(4, BinScope::Global);
        let kmeans = [0.3297, 0.2282, 0.3761, 0.3146, 0.2198];
        let seeded = [0.5159, 0.4909, 0.3170, 0.5318, 0.3456];
        let mut cells = Vec::new();
        for (strategy, vals) in [(Strategy::KMeans, kmeans), (Strategy::CciaKMeans, seeded)] {
            for (&p, v) in pre.iter().zip(vals) {
                cells.push(Cell {
                    dataset: "Serum".into(),
                    preprocessing: p,
                    strategy,
                    outcome: stats(v),
                });
            }
        }
        ExperimentResult {
            datasets: vec![DatasetInfo {
                name: "Serum".into(),
                source: "fixture".into(),
                summary: DatasetSummary {
                    n_genes_raw: 517,
                    n_genes_kept: 517,
                    n_conditions: 17,
                    n_missing_cells: 0,
                },
                notes: vec![],
            }],
            preprocessing: pre,
            k_clusters: 12,
            n_runs: 10,
            base_seed: 0,
            cells,
            notes: vec![],
        }
    }

    #[test]
    fn csv_reproduces_fixture_row() {
        let text = render_table(&serum_fixture(), TableFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "Data Set,Methods,Actual Data set,Discretization Method-I,Discretization Method-II,\
             Discretization Method-III,Discretization Method-IV"
        );
        assert_eq!(lines[1], "Serum,K-Means,0.3297,0.2282,0.3761,0.3146,0.2198");
        assert_eq!(
            lines[2],
            "Serum,CCIA with K-Means,0.5159,0.4909,0.3170,0.5318,0.3456"
        );
    }

    #[test]
    fn markdown_layout() {
        let text = render_table(&serum_fixture(), TableFormat::Markdown).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("| Serum | K-Means | 0.3297 |"));
        assert!(lines[3].starts_with("|  | CCIA with K-Means | 0.5159 |"));
    }

    #[test]
    fn empty_result_is_header_only() {
        let mut r = serum_fixture();
        r.datasets.clear();
        r.cells.clear();
        let csv = render_table(&r, TableFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1);
        let md = render_table(&r, TableFormat::Markdown).unwrap();
        assert_eq!(md.lines().count(), 2);
        let doc: TableDoc =
            serde_json::from_str(&render_table(&r, TableFormat::Json).unwrap()).unwrap();
        assert!(doc.rows.is_empty());
        assert_eq!(doc.columns.len(), 5);
    }

    #[test]
    fn json_round_trip() {
        let mut r = serum_fixture();
        if let CellOutcome::Ok(s) = &mut r.cells[0].outcome {
            s.best_silhouette = 0.123456789;
        }
        let doc: TableDoc =
            serde_json::from_str(&render_table(&r, TableFormat::Json).unwrap()).unwrap();
        assert_eq!(doc.rows[0].values[0], Some(0.1235));
        assert_eq!(doc.rows[0].values[1], Some(0.2282));
        assert_eq!(doc.rows[1].values[4], Some(0.3456));
    }

    #[test]
    fn failed_cells_are_marked() {
        let mut r = serum_fixture();
        r.cells[2].outcome = CellOutcome::Failed {
            error: "boom".into(),
        };
        let csv = render_table(&r, TableFormat::Csv).unwrap();
        assert!(csv.lines().nth(1).unwrap().contains(",ERR,"));
        let doc: TableDoc =
            serde_json::from_str(&render_table(&r, TableFormat::Json).unwrap()).unwrap();
        assert_eq!(doc.rows[0].values[2], None);
        assert!(doc.rows[0].errors[0].contains("boom"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("md".parse::<TableFormat>().unwrap(), TableFormat::Markdown);
        assert!("xml".parse::<TableFormat>().is_err());
    }
}
