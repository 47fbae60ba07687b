//! Per-seed metric tables, mean/std aggregates, and the markdown summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, quantile};
use super::run::condition_rank;
use crate::corpus::Split;
use crate::infodiff::AspectDifferenceReport;
use crate::metrics::MetricsReport;
use crate::summarizer::Aspect;
use crate::util::fmt_f64;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Metrics of one seeded run of one condition on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub condition: String,
    pub split: Split,
    pub seed: Option<u64>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct ReportInputs {
    pub rows: Vec<MetricRow>,
    pub infodiff: Option<AspectDifferenceReport>,
    /// Gold positive ratio per split.
    pub gold_ratio: Vec<(Split, f64)>,
    pub aspects: Vec<Aspect>,
}

/// Aggregate of one metric for one condition: mean/std, or the marker of an
/// undefined run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Value { mean: f64, std: f64 },
    Undefined(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub condition: String,
    pub split: Split,
    pub n: usize,
    pub cells: Vec<(String, Cell)>,
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p)?;
    }
    Ok(())
}

fn marker_of(m: &MetricsReport, name: &str) -> String {
    let score = if name == "AUROC" { &m.auroc } else { &m.auprc };
    score.to_string()
}

type Group<'a> = ((Split, String), Vec<&'a MetricRow>);

/// Groups rows by (split, condition) in canonical order.
fn grouped<'a>(rows: &'a [MetricRow], aspects: &[Aspect]) -> Vec<Group<'a>> {
    let mut map: BTreeMap<(usize, (usize, String)), Group<'a>> = BTreeMap::new();
    for r in rows {
        let split_rank = if r.split == Split::Test { 0 } else { 1 };
        map.entry((split_rank, condition_rank(&r.condition, aspects)))
            .or_insert_with(|| ((r.split, r.condition.clone()), Vec::new()))
            .1
            .push(r);
    }
    map.into_values().collect()
}

/// Mean and sample std of each metric across seeds, per condition and split.
pub fn aggregate_rows(rows: &[MetricRow], aspects: &[Aspect]) -> Vec<AggregateRow> {
    grouped(rows, aspects)
        .into_iter()
        .map(|((split, condition), runs)| {
            let names = runs[0].metrics.named_values().map(|(n, _)| n);
            let cells = names
                .iter()
                .enumerate()
                .map(|(i, &name)| {
                    let values: Vec<Option<f64>> = runs.iter().map(|r| r.metrics.named_values()[i].1).collect();
                    let cell = match values.iter().position(Option::is_none) {
                        Some(bad) => Cell::Undefined(marker_of(&runs[bad].metrics, name)),
                        None => {
                            let v: Vec<f64> = values.into_iter().flatten().collect();
                            let a = aggregate(&v).expect("non-empty group");
                            Cell::Value { mean: a.mean, std: a.std }
                        }
                    };
                    (name.to_string(), cell)
                })
                .collect();
            AggregateRow {
                condition,
                split,
                n: runs.len(),
                cells,
            }
        })
        .collect()
}

fn write_per_seed(dir: &Path, rows: &[MetricRow]) -> Result<(), ReportError> {
    let path = dir.join("per_seed.csv");
    ensure_parent(&path)?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "condition",
        "split",
        "seed",
        "AUROC",
        "AUPRC",
        "MaAvg F1",
        "Neg F1",
        "Pos F1",
        "precision_pos",
        "recall_pos",
        "positive_prediction_ratio",
        "k",
    ])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.condition.clone(),
            r.split.to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            m.auroc.to_string(),
            m.auprc.to_string(),
            fmt_f64(m.f1_macro),
            fmt_f64(m.f1_neg),
            fmt_f64(m.f1_pos),
            fmt_f64(m.precision_pos),
            fmt_f64(m.recall_pos),
            fmt_f64(m.positive_prediction_ratio),
            m.k.to_string(),
        ])?;
    }
    w.flush()?;
    let mut json = serde_json::to_string_pretty(rows)?;
    json.push('\n');
    std::fs::write(dir.join("per_seed.json"), json)?;
    Ok(())
}

fn write_aggregate_table(path: &Path, rows: &[AggregateRow], std: bool) -> Result<(), ReportError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["condition".to_string(), "split".to_string(), "n".to_string()];
    if let Some(first) = rows.first() {
        header.extend(first.cells.iter().map(|(n, _)| n.clone()));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.condition.clone(), r.split.to_string(), r.n.to_string()];
        rec.extend(r.cells.iter().map(|(_, c)| match c {
            Cell::Value { mean, std: s } => fmt_f64(if std { *s } else { *mean }),
            Cell::Undefined(m) => m.clone(),
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_positive_ratio(path: &Path, inputs: &ReportInputs) -> Result<(), ReportError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["condition", "split", "n", "min", "q1", "median", "q3", "max", "gold_ratio"])?;
    for ((split, condition), runs) in grouped(&inputs.rows, &inputs.aspects) {
        let v: Vec<f64> = runs.iter().map(|r| r.metrics.positive_prediction_ratio).collect();
        let q = |p: f64| fmt_f64(quantile(&v, p).expect("non-empty group"));
        let gold = inputs
            .gold_ratio
            .iter()
            .find(|(s, _)| *s == split)
            .map_or(f64::NAN, |(_, g)| *g);
        w.write_record([
            condition,
            split.to_string(),
            v.len().to_string(),
            q(0.0),
            q(0.25),
            q(0.5),
            q(0.75),
            q(1.0),
            fmt_f64(gold),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Markdown summary: test-split mean ± std table with the two best
/// conditions per metric in bold, plus the information-difference scores.
pub fn summary_markdown(agg: &[AggregateRow], infodiff: Option<&AspectDifferenceReport>) -> String {
    let mut md = String::new();
    let test: Vec<&AggregateRow> = agg.iter().filter(|r| r.split == Split::Test).collect();
    md.push_str("# Results\n\n## Test split (mean ± std over seeds)\n\n");
    if let Some(first) = test.first() {
        let names: Vec<&str> = first.cells.iter().map(|(n, _)| n.as_str()).collect();
        let mut best: Vec<Vec<usize>> = Vec::new();
        for i in 0..names.len() {
            // ratio is descriptive, not a score to maximize
            if names[i] == "positive_prediction_ratio" {
                best.push(Vec::new());
                continue;
            }
            let mut ranked: Vec<(usize, f64)> = test
                .iter()
                .enumerate()
                .filter_map(|(k, r)| match r.cells[i].1 {
                    Cell::Value { mean, .. } => Some((k, mean)),
                    Cell::Undefined(_) => None,
                })
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            best.push(ranked.iter().take(2).map(|(k, _)| *k).collect());
        }
        let _ = writeln!(md, "| condition | n | {} |", names.join(" | "));
        let _ = writeln!(md, "|---|---|{}", "---|".repeat(names.len()));
        for (k, r) in test.iter().enumerate() {
            let cells: Vec<String> = r
                .cells
                .iter()
                .enumerate()
                .map(|(i, (_, c))| match c {
                    Cell::Value { mean, std } => {
                        let s = format!("{mean:.4} ± {std:.4}");
                        if best[i].contains(&k) {
                            format!("**{s}**")
                        } else {
                            s
                        }
                    }
                    Cell::Undefined(m) => m.clone(),
                })
                .collect();
            let _ = writeln!(md, "| {} | {} | {} |", r.condition, r.n, cells.join(" | "));
        }
    } else {
        md.push_str("No test-split results.\n");
    }
    if let Some(rep) = infodiff {
        md.push_str("\n## Information difference (tau distance)\n\n| kind | label | D | D (off-diagonal) |\n|---|---|---|---|\n");
        for s in &rep.intra {
            let off = s.d_offdiag.map_or("undefined".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(md, "| intra | {} | {:.4} | {off} |", s.aspect, s.d);
        }
        for s in &rep.inter {
            let _ = writeln!(md, "| inter | {} vs {} | {:.4} | |", s.aspect_a, s.aspect_b, s.d);
        }
    }
    md
}

/// Writes `metrics/` and `report/` under `out_dir`.
pub fn emit_report(out_dir: &Path, inputs: &ReportInputs) -> Result<(), ReportError> {
    write_per_seed(&out_dir.join("metrics"), &inputs.rows)?;
    let agg = aggregate_rows(&inputs.rows, &inputs.aspects);
    let dir = out_dir.join("report");
    write_aggregate_table(&dir.join("table_mean.csv"), &agg, false)?;
    write_aggregate_table(&dir.join("table_std.csv"), &agg, true)?;
    write_positive_ratio(&dir.join("positive_ratio.csv"), inputs)?;
    std::fs::write(dir.join("summary.md"), summary_markdown(&agg, inputs.infodiff.as_ref()))?;
    Ok(())
}
