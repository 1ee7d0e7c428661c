//! Aggregation of run summaries into result tables.
//!
//! Scans an output tree for `summary.json` files, groups them by
//! (strategy, labels-per-class), and reports mean ± sample standard
//! deviation of the headline metrics across seeds — an aligned text table
//! for reading and a CSV with full precision for downstream tooling.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::runner::CellSummary;

/// Aggregated metrics of one (strategy, k) group.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub strategy_index: usize,
    pub labels_per_class: usize,
    /// Number of seeds aggregated.
    pub n: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
    pub target_accuracy_mean: Option<f64>,
    pub target_accuracy_std: Option<f64>,
    pub target_macro_f1_mean: Option<f64>,
    pub target_macro_f1_std: Option<f64>,
}

/// The full report: grouped rows plus rendered text and CSV artifacts.
#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub text: String,
    pub csv: String,
}

/// Mean and sample (n−1) standard deviation; std is 0 for a single value.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// "0.72 ± 0.02", or just "0.72" for single-seed groups.
fn format_cell(mean: f64, std: f64, n: usize) -> String {
    if n < 2 {
        format!("{mean:.2}")
    } else {
        format!("{mean:.2} ± {std:.2}")
    }
}

fn collect_summaries(dir: &Path, out: &mut Vec<CellSummary>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_summaries(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "summary.json") {
            let text = std::fs::read_to_string(&path)?;
            let summary: CellSummary = serde_json::from_str(&text).map_err(|e| {
                Error::InvalidInput(format!("unreadable summary {}: {e}", path.display()))
            })?;
            out.push(summary);
        }
    }
    Ok(())
}

/// Loads every `summary.json` under `results_dir` (recursively).
pub fn load_summaries(results_dir: &Path) -> Result<Vec<CellSummary>> {
    let mut summaries = Vec::new();
    collect_summaries(results_dir, &mut summaries)?;
    if summaries.is_empty() {
        return Err(Error::EmptyResults(format!(
            "no summary.json files under {}",
            results_dir.display()
        )));
    }
    Ok(summaries)
}

fn optional_stats(values: &[f64], expected: usize) -> (Option<f64>, Option<f64>) {
    if values.len() == expected && expected > 0 {
        let (mean, std) = mean_std(values);
        (Some(mean), Some(std))
    } else {
        (None, None)
    }
}

/// Group key: (strategy position in its config, strategy name, k).
type GroupKey = (usize, String, usize);

/// Groups summaries by (strategy, k) and aggregates across seeds. Rows come
/// back ordered by the strategy's position in its experiment config, then k.
pub fn aggregate(summaries: &[CellSummary]) -> Vec<ReportRow> {
    let mut groups: Vec<(GroupKey, Vec<&CellSummary>)> = Vec::new();
    for s in summaries {
        let key = (s.strategy_index, s.strategy.clone(), s.labels_per_class);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(s),
            None => groups.push((key, vec![s])),
        }
    }
    groups.sort_by(|(a, _), (b, _)| a.cmp(b));
    groups
        .into_iter()
        .map(|((strategy_index, strategy, labels_per_class), members)| {
            let n = members.len();
            let accs: Vec<f64> = members.iter().map(|s| s.accuracy).collect();
            let f1s: Vec<f64> = members.iter().map(|s| s.macro_f1).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&accs);
            let (macro_f1_mean, macro_f1_std) = mean_std(&f1s);
            let t_accs: Vec<f64> = members.iter().filter_map(|s| s.target_accuracy).collect();
            let t_f1s: Vec<f64> = members.iter().filter_map(|s| s.target_macro_f1).collect();
            let (target_accuracy_mean, target_accuracy_std) = optional_stats(&t_accs, n);
            let (target_macro_f1_mean, target_macro_f1_std) = optional_stats(&t_f1s, n);
            ReportRow {
                strategy,
                strategy_index,
                labels_per_class,
                n,
                accuracy_mean,
                accuracy_std,
                macro_f1_mean,
                macro_f1_std,
                target_accuracy_mean,
                target_accuracy_std,
                target_macro_f1_mean,
                target_macro_f1_std,
            }
        })
        .collect()
}

fn render_metric_table(
    title: &str,
    rows: &[ReportRow],
    value: impl Fn(&ReportRow) -> Option<(f64, f64)>,
) -> Option<String> {
    let mut ks: Vec<usize> = rows.iter().map(|r| r.labels_per_class).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut strategies: Vec<(usize, String)> = rows
        .iter()
        .map(|r| (r.strategy_index, r.strategy.clone()))
        .collect();
    strategies.sort();
    strategies.dedup();

    // Best mean per k column, for marking.
    let mut best: Vec<Option<f64>> = vec![None; ks.len()];
    for r in rows {
        if let Some((mean, _)) = value(r) {
            let col = ks.iter().position(|&k| k == r.labels_per_class).unwrap();
            if best[col].is_none_or(|b| mean > b) {
                best[col] = Some(mean);
            }
        }
    }
    if best.iter().all(Option::is_none) {
        return None;
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut header = vec![title.to_string()];
    header.extend(ks.iter().map(|k| format!("k={k}")));
    cells.push(header);
    for (index, strategy) in &strategies {
        let mut line = vec![strategy.clone()];
        for (col, &k) in ks.iter().enumerate() {
            let row = rows
                .iter()
                .find(|r| r.strategy_index == *index && r.strategy == *strategy && r.labels_per_class == k);
            let text = match row.and_then(&value) {
                Some((mean, std)) => {
                    let n = row.unwrap().n;
                    let marker = if Some(mean) == best[col] { " *" } else { "" };
                    format!("{}{marker}", format_cell(mean, std, n))
                }
                None => "-".into(),
            };
            line.push(text);
        }
        cells.push(line);
    }

    let cols = cells[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<width$}", width = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    Some(out)
}

/// Extracts one metric's (mean, std) from a row, if the row carries it.
type MetricGetter = fn(&ReportRow) -> Option<(f64, f64)>;

fn render_text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let sections: [(&str, MetricGetter); 4] = [
        ("accuracy", |r| Some((r.accuracy_mean, r.accuracy_std))),
        ("macro_f1", |r| Some((r.macro_f1_mean, r.macro_f1_std))),
        ("target_accuracy", |r| {
            r.target_accuracy_mean.zip(r.target_accuracy_std)
        }),
        ("target_macro_f1", |r| {
            r.target_macro_f1_mean.zip(r.target_macro_f1_std)
        }),
    ];
    for (title, value) in sections {
        if let Some(table) = render_metric_table(title, rows, value) {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&table);
        }
    }
    out.push_str("\n* best mean in column; ± is sample standard deviation across seeds\n");
    out
}

fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "strategy,labels_per_class,seeds,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,\
         target_accuracy_mean,target_accuracy_std,target_macro_f1_mean,target_macro_f1_std\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.strategy,
            r.labels_per_class,
            r.n,
            r.accuracy_mean,
            r.accuracy_std,
            r.macro_f1_mean,
            r.macro_f1_std,
            opt(r.target_accuracy_mean),
            opt(r.target_accuracy_std),
            opt(r.target_macro_f1_mean),
            opt(r.target_macro_f1_std),
        ));
    }
    out
}

/// Builds the report for a results tree and writes `report.txt` and
/// `report.csv` into its root.
pub fn build_report(results_dir: &Path) -> Result<Report> {
    let summaries = load_summaries(results_dir)?;
    let rows = aggregate(&summaries);
    let text = render_text(&rows);
    let csv = render_csv(&rows);
    std::fs::write(results_dir.join("report.txt"), &text)?;
    std::fs::write(results_dir.join("report.csv"), &csv)?;
    Ok(Report { rows, text, csv })
}

/// Where a cell's artifacts land, exposed for tooling and tests.
pub fn cell_directory(root: &Path, strategy: &str, k: usize, seed: u64) -> PathBuf {
    root.join(strategy).join(format!("k{k}")).join(format!("seed{seed}"))
}
