//! Metric reports: `key=value` text and CSV rows with fixed float precision.

use std::fmt::Write as _;

use crate::model::TaskMetrics;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub task: String,
    pub backend: String,
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub split: String,
    pub seed: u64,
}

pub const METRIC_CSV_HEADER: &str = "task,backend,metric,value,n,split,seed";

pub fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "nan".into()
    }
}

/// Rows for every metric and every defined per-class AP.
pub fn metric_rows(
    task: &str,
    backend: &str,
    split: &str,
    seed: u64,
    n: usize,
    metrics: &TaskMetrics,
) -> Vec<MetricRow> {
    let row = |metric: String, value: f64| MetricRow {
        task: task.into(),
        backend: backend.into(),
        metric,
        value,
        n,
        split: split.into(),
        seed,
    };
    let mut rows: Vec<MetricRow> = metrics.values.iter().map(|(k, &v)| row(k.clone(), v)).collect();
    for (c, ap) in metrics.per_class_ap.iter().enumerate() {
        if let Some(v) = ap {
            rows.push(row(format!("ap_{}", crate::manifest::Technique::ALL[c].as_str()), *v));
        }
    }
    rows
}

pub fn rows_to_csv(rows: &[MetricRow]) -> String {
    let mut out = format!("{METRIC_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.task,
            r.backend,
            r.metric,
            fmt_value(r.value),
            r.n,
            r.split,
            r.seed
        );
    }
    out
}

/// `key=value` lines, one per row.
pub fn rows_to_text(rows: &[MetricRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(out, "{}={}", r.metric, fmt_value(r.value));
    }
    out
}
