//! Metrics records, run summaries and their on-disk formats.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One evaluation point of a run. `wall_ms` is the only non-deterministic
/// field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub epoch: u64,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub eval_accuracy: Option<f64>,
    pub lr: f64,
    pub grad_evals: u64,
    pub grad_norm: f64,
    pub gv_norm: Option<f64>,
    pub cos_theta: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub seed: u64,
    pub steps: u64,
    pub final_train_loss: f64,
    pub final_eval_loss: f64,
    pub final_accuracy: Option<f64>,
    pub best_accuracy: Option<f64>,
    pub grad_evals: u64,
    /// SHA-256 over the little-endian bytes of every iterate.
    pub trajectory_digest: String,
    pub total_ms: f64,
}

pub const METRICS_FIELDS: &str = "step, epoch, train_loss, eval_loss, eval_accuracy, lr, grad_evals, grad_norm, \
gv_norm, cos_theta, wall_ms";

pub fn to_jsonl(records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<MetricsRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Invalid(format!("metrics line {}: {e}", i + 1))))
        .collect()
}

/// A copy of the records with the wall-clock field zeroed.
pub fn without_wall_clock(records: &[MetricsRecord]) -> Vec<MetricsRecord> {
    records.iter().map(|r| MetricsRecord { wall_ms: 0.0, ..r.clone() }).collect()
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn write_run(dir: &Path, records: &[MetricsRecord], summary: &Summary) -> Result<()> {
    write_file(&dir.join("metrics.jsonl"), &to_jsonl(records))?;
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), &(json + "\n"))
}
