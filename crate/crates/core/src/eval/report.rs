use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::protocols::NdcgPoint;
use crate::error::Result;

/// One metric value over one slice of the evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub slice: String,
    pub value: f64,
    /// Pairs for concordance, items otherwise.
    pub n: u64,
    /// Non-empty when the value is a placeholder for an undefined metric.
    pub flag: String,
    pub config_fingerprint: String,
}

pub const SLICE_ALL: &str = "all";
pub const SLICE_TOP_SALES: &str = "top-25%-sales";

pub fn serving_day_slice(d: u32) -> String {
    format!("serving-day>={d}")
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
}

pub fn reports_csv(rows: &[EvalReport]) -> Result<Vec<u8>> {
    csv_bytes(rows)
}

/// `checkpoint_day,method,ndcg` rows for plotting.
pub fn ndcg_plot_csv(points: &[NdcgPoint]) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Row<'a> {
        checkpoint_day: u32,
        method: &'a str,
        ndcg: f64,
    }
    let rows: Vec<Row> =
        points.iter().map(|p| Row { checkpoint_day: p.checkpoint_day, method: &p.method, ndcg: p.ndcg }).collect();
    csv_bytes(&rows)
}

pub fn summary_text(rows: &[EvalReport]) -> String {
    let mut out = String::new();
    let width = rows.iter().map(|r| r.metric.len()).max().unwrap_or(6).max(6);
    for r in rows {
        let _ = write!(out, "{:<width$}  {:<16}  {:>8.4}  n={}", r.metric, r.slice, r.value, r.n);
        if !r.flag.is_empty() {
            let _ = write!(out, "  [{}]", r.flag);
        }
        out.push('\n');
    }
    out
}
