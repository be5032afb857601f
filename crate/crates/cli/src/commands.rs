//! The `run`, `sweep`, `probe`, `bound` and `check` subcommands as library
//! functions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use flatopt::analysis::{gv_stability_probe, pac_bound_terms, BoundInputs, BoundTerms, StabilityProbe};
use flatopt::data::{rng_from_seed, Minibatch, SamplerState};
use flatopt::objectives::{eval_grad, finite_diff_grad, Objective};
use flatopt::optimizers::Method;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::metrics::{write_file, write_run};
use crate::train::{build_model, run_experiment, Model, RunOutput};

/// Step used for central differences in `check`.
pub const CHECK_STEP: f64 = 1e-6;
/// `check` passes when the worst relative error stays below this.
pub const CHECK_TOLERANCE: f64 = 1e-4;
/// Gradient magnitudes below this are compared absolutely.
pub const CHECK_FLOOR: f64 = 1e-5;
pub const CHECK_POINTS: u64 = 10;

pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("flatopt-out"))
}

/// Trains and writes `metrics.jsonl` and `summary.json` under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    let output = run_experiment(cfg, false)?;
    write_run(out, &output.records, &output.summary)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    pub seed: u64,
    pub values: Vec<String>,
    pub outcome: std::result::Result<crate::metrics::Summary, String>,
}

fn cartesian(grid: &[(String, Vec<String>)]) -> Vec<Vec<String>> {
    let mut cells = vec![Vec::new()];
    for (_, values) in grid {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(v.clone());
                    c
                })
            })
            .collect();
    }
    cells
}

fn is_unknown_key(cfg: &ExperimentConfig, key: &str, value: &str) -> bool {
    matches!(cfg.with_override(key, value), Err(CliError::Config { key: k, reason, .. }) if k == key && reason == "unknown key")
}

/// One run per grid cell, cell `i` seeded with `cfg.seed + i`.
///
/// Cells run on `jobs` threads. A failing cell is recorded in its row and
/// the rest continue. Writes `cell_NNN/` directories and `aggregate.csv`.
pub fn sweep(cfg: &ExperimentConfig, grid: &[(String, Vec<String>)], out: &Path, jobs: usize) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(CliError::Invalid("empty grid".into()));
    }
    for (key, values) in grid {
        if key == "seed" {
            return Err(CliError::Invalid("`seed` cannot be swept; cells derive their seeds from it".into()));
        }
        if is_unknown_key(cfg, key, &values[0]) {
            return Err(CliError::Invalid(format!("grid key `{key}` is not a config field")));
        }
    }
    let cells = cartesian(grid);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, values)| {
                let seed = cfg.seed + i as u64;
                let outcome = (|| {
                    let mut c = cfg.with_override("seed", &seed.to_string())?;
                    for ((key, _), v) in grid.iter().zip(values) {
                        c = c.with_override(key, v)?;
                    }
                    Ok::<_, CliError>(run(&c, &out.join(format!("cell_{i:03}")))?.summary)
                })()
                .map_err(|e| e.to_string());
                SweepRow { cell: i, seed, values: values.clone(), outcome }
            })
            .collect()
    });
    write_file(&out.join("aggregate.csv"), &aggregate_csv(grid, &rows)?)?;
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn aggregate_csv(grid: &[(String, Vec<String>)], rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cell".to_string(), "seed".to_string()];
    header.extend(grid.iter().map(|(k, _)| k.clone()));
    header.extend(
        ["status", "final_accuracy", "best_accuracy", "final_eval_loss", "grad_evals", "trajectory_digest", "total_ms"]
            .map(String::from),
    );
    let csv_err = |e: csv::Error| CliError::Invalid(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![row.cell.to_string(), row.seed.to_string()];
        rec.extend(row.values.iter().cloned());
        match &row.outcome {
            Ok(s) => rec.extend([
                "ok".to_string(),
                opt(s.final_accuracy),
                opt(s.best_accuracy),
                s.final_eval_loss.to_string(),
                s.grad_evals.to_string(),
                s.trajectory_digest.clone(),
                s.total_ms.to_string(),
            ]),
            Err(msg) => {
                rec.push(format!("error: {msg}"));
                rec.extend(std::iter::repeat_n(String::new(), 6));
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Trains a full-SAM run while recording every gradient bundle and writes
/// the stability series to `probe.csv`, with a `mean` footer row.
pub fn probe(cfg: &ExperimentConfig, k: u64, out: &Path) -> Result<StabilityProbe> {
    let full = match cfg.method {
        Method::Sam => true,
        Method::SamK | Method::LookSam => cfg.optimizer.sharpness.k == 1,
        Method::Base => false,
    };
    if !full {
        return Err(CliError::config(0, "optimizer.method", "probe needs a full sharpness-aware run (sam, or k = 1)"));
    }
    let output = run_experiment(cfg, true)?;
    let trace = output.trace.expect("trace was requested");
    let probe = gv_stability_probe(&trace, k).map_err(|e| match e {
        flatopt::Error::ZeroGradientTrace => CliError::Numeric { step: 0, reason: e.to_string() },
        other => CliError::Library(other),
    })?;
    write_file(&out.join("probe.csv"), &probe_csv(&probe)?)?;
    Ok(probe)
}

pub fn probe_csv(p: &StabilityProbe) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Invalid(format!("csv: {e}"));
    w.write_record(["t", "d_gs", "d_gh", "d_gv", "norm_d_gs", "norm_d_gh", "norm_d_gv"]).map_err(csv_err)?;
    for r in &p.rows {
        w.write_record(
            [r.t as f64, r.d_gs, r.d_gh, r.d_gv, r.norm_d_gs, r.norm_d_gh, r.norm_d_gv].map(|x| x.to_string()),
        )
        .map_err(csv_err)?;
    }
    let n = p.rows.len() as f64;
    let mean = |f: fn(&flatopt::analysis::ProbeRow) -> f64| (p.rows.iter().map(f).sum::<f64>() / n).to_string();
    w.write_record([
        "mean".to_string(),
        mean(|r| r.d_gs),
        mean(|r| r.d_gh),
        mean(|r| r.d_gv),
        p.mean_norm_d_gs().to_string(),
        p.mean_norm_d_gh().to_string(),
        p.mean_norm_d_gv().to_string(),
    ])
    .map_err(csv_err)?;
    let bytes = w.into_inner().map_err(|e| CliError::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Evaluates the bound and renders each additive term.
pub fn bound(n: u64, delta: f64, dim: u64, w_norm_sq: f64, rho: f64, rho0: f64) -> Result<(BoundTerms, String)> {
    let inputs = BoundInputs::new(n, delta, dim, w_norm_sq, rho, rho0)?;
    let t = pac_bound_terms(&inputs);
    let mut s = String::new();
    writeln!(s, "complexity = {}", t.complexity).unwrap();
    writeln!(s, "confidence = {}", t.confidence).unwrap();
    writeln!(s, "union = {}", t.union).unwrap();
    writeln!(s, "denominator = {}", t.denominator).unwrap();
    writeln!(s, "bound = {}", t.value).unwrap();
    Ok((t, s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Worst relative error at each point.
    pub per_point: Vec<f64>,
    pub max_rel_error: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < CHECK_TOLERANCE
    }
}

/// `|a − b| / max(|a|, |b|, CHECK_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(CHECK_FLOOR)
}

/// Compares analytic and central-difference gradients at each point.
pub fn check_objective(obj: &dyn Objective, points: &[Vec<f64>], batch: &Minibatch) -> Result<CheckReport> {
    let mut per_point = Vec::with_capacity(points.len());
    for w in points {
        let (_, g) = eval_grad(obj, w, batch)?;
        let fd = finite_diff_grad(obj, w, batch, CHECK_STEP)?;
        per_point.push(g.iter().zip(fd.iter()).map(|(&a, &b)| relative_error(a, b)).fold(0.0, f64::max));
    }
    let max_rel_error = per_point.iter().copied().fold(0.0, f64::max);
    Ok(CheckReport { per_point, max_rel_error })
}

/// Seeded check points for a configured model: fresh initializations for
/// classifiers, Gaussian jitter around the start otherwise.
pub fn check_points(model: &Model, seed: u64) -> Result<(Vec<Vec<f64>>, Minibatch)> {
    let points = (0..CHECK_POINTS)
        .map(|i| {
            let w0 = model.initial_params(seed + i)?;
            Ok(match model {
                Model::Mlp { .. } => w0.into_inner(),
                _ => {
                    let mut rng = rng_from_seed(seed + i);
                    w0.iter()
                        .map(|x| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            x + z
                        })
                        .collect::<Vec<f64>>()
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let batch = match model.train_rows() {
        Some(n) => SamplerState::new(seed, n)?.next_batch(n.min(64))?,
        None => Minibatch::unit(),
    };
    Ok((points, batch))
}

pub fn check(cfg: &ExperimentConfig) -> Result<CheckReport> {
    let model = build_model(cfg)?;
    let (points, batch) = check_points(&model, cfg.seed)?;
    check_objective(model.objective(), &points, &batch)
}
