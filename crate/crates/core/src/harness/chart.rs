//! Grouped bar chart of best-run silhouettes as standalone SVG.
//!
//! One panel per strategy present in the result, one bar group per dataset,
//! one bar per preprocessing variant. Output is a pure function of the
//! result, so re-rendering gives byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use super::{CellOutcome, ExperimentResult, Strategy};
use crate::error::{Error, Result};
use crate::io::write_atomic;

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

const BAR_W: f64 = 18.0;
const BAR_GAP: f64 = 2.0;
const GROUP_GAP: f64 = 24.0;
const PANEL_H: f64 = 240.0;
const PLOT_H: f64 = 170.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
const LEGEND_H: f64 = 24.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn chart_svg(r: &ExperimentResult) -> Result<String> {
    if r.cells.is_empty() {
        return Err(Error::InvalidInput("cannot chart an empty result".into()));
    }
    let strategies: Vec<Strategy> = [Strategy::KMeans, Strategy::CciaKMeans]
        .into_iter()
        .filter(|s| r.cells.iter().any(|c| c.strategy == *s))
        .collect();
    let datasets: Vec<&str> = r
        .datasets
        .iter()
        .map(|d| d.name.as_str())
        .filter(|d| r.cells.iter().any(|c| c.dataset == *d))
        .collect();
    let variants: Vec<_> = r
        .preprocessing
        .iter()
        .copied()
        .filter(|p| r.cells.iter().any(|c| c.preprocessing == *p))
        .collect();

    let lo = r
        .cells
        .iter()
        .filter_map(|c| c.outcome.stats())
        .map(|s| s.best_silhouette)
        .fold(0.0_f64, f64::min)
        .max(-1.0);
    let (y_min, y_max) = (if lo < 0.0 { -1.0 } else { 0.0 }, 1.0);
    let y = |v: f64| PLOT_H * (y_max - v.clamp(y_min, y_max)) / (y_max - y_min);

    let group_w = variants.len() as f64 * (BAR_W + BAR_GAP);
    let plot_w = datasets.len() as f64 * (group_w + GROUP_GAP) + GROUP_GAP;
    let width = LEFT + plot_w + 20.0;
    let height = TOP + strategies.len() as f64 * PANEL_H + LEGEND_H + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">Mean silhouette by dataset and preprocessing (K = {})</text>"#,
        width / 2.0,
        r.k_clusters
    );

    for (pi, strategy) in strategies.iter().enumerate() {
        let oy = TOP + pi as f64 * PANEL_H;
        let _ = writeln!(
            s,
            r#"<g class="panel" transform="translate({LEFT:.1},{oy:.1})">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="-6" text-anchor="middle" font-size="12">{}</text>"#,
            plot_w / 2.0,
            escape(strategy.label())
        );
        // axis and gridlines every 0.25
        let mut tick = y_min;
        while tick <= y_max + 1e-9 {
            let ty = y(tick);
            let _ = writeln!(
                s,
                r##"<line x1="0" y1="{ty:.1}" x2="{plot_w:.1}" y2="{ty:.1}" stroke="#ddd"/><text x="-6" y="{:.1}" text-anchor="end">{tick:.2}</text>"##,
                ty + 4.0
            );
            tick += 0.25;
        }
        let _ = writeln!(
            s,
            r##"<line x1="0" y1="0" x2="0" y2="{PLOT_H:.1}" stroke="#333"/><line x1="0" y1="{:.1}" x2="{plot_w:.1}" y2="{:.1}" stroke="#333"/>"##,
            y(0.0),
            y(0.0)
        );

        for (di, dataset) in datasets.iter().enumerate() {
            let gx = GROUP_GAP + di as f64 * (group_w + GROUP_GAP);
            for (vi, pre) in variants.iter().enumerate() {
                let bx = gx + vi as f64 * (BAR_W + BAR_GAP);
                let cell = r.cell(dataset, *pre, *strategy);
                match cell.map(|c| &c.outcome) {
                    Some(CellOutcome::Ok(st)) => {
                        let v = st.best_silhouette;
                        let (top, bottom) = (y(v.max(0.0)), y(v.min(0.0)));
                        let _ = writeln!(
                            s,
                            r#"<rect class="bar" x="{bx:.1}" y="{top:.1}" width="{BAR_W:.1}" height="{:.1}" fill="{}"><title>{} / {}: {v:.4}</title></rect>"#,
                            (bottom - top).max(0.5),
                            PALETTE[vi % PALETTE.len()],
                            escape(dataset),
                            escape(pre.heading())
                        );
                    }
                    Some(CellOutcome::Failed { .. }) => {
                        let _ = writeln!(
                            s,
                            r##"<text class="error" x="{:.1}" y="{:.1}" text-anchor="middle" fill="#c00">ERR</text>"##,
                            bx + BAR_W / 2.0,
                            y(0.0) - 4.0
                        );
                    }
                    None => {}
                }
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                gx + group_w / 2.0,
                PLOT_H + 16.0,
                escape(dataset)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let ly = TOP + strategies.len() as f64 * PANEL_H;
    let mut lx = LEFT;
    for (vi, pre) in variants.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ly,
            PALETTE[vi % PALETTE.len()],
            lx + 14.0,
            ly + 9.0,
            escape(pre.heading())
        );
        lx += 14.0 + 7.0 * pre.heading().len() as f64;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes [`chart_svg`] to `out`.
pub fn render_chart(r: &ExperimentResult, out: impl AsRef<Path>) -> Result<()> {
    write_atomic(out, chart_svg(r)?.as_bytes())
}
