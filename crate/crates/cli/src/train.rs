//! Building objectives from configs and running the training loop.

use std::sync::Arc;
use std::time::Instant;

use flatopt::analysis::StabilityTrace;
use flatopt::data::{gen_blobs, gen_two_moons, load_csv, load_idx, Dataset, Minibatch, SamplerState, Standardizer};
use flatopt::objectives::{eval_loss, BasinLandscape, DenseMatrix, MlpClassifier, Objective, QuadraticObjective};
use flatopt::optimizers::{step, Method, OptimizerState, PerturbationMode};
use flatopt::{LayerPartition, ParamVector};
use sha2::{Digest, Sha256};

use crate::config::{DataSource, DatasetSpec, ExperimentConfig, ObjectiveSpec};
use crate::error::{CliError, Result};
use crate::metrics::{MetricsRecord, Summary};

pub enum Model {
    Mlp { model: MlpClassifier, test: Dataset },
    Quadratic { objective: QuadraticObjective, start: Vec<f64> },
    Basin { objective: BasinLandscape, start: Vec<f64> },
}

impl Model {
    pub fn objective(&self) -> &dyn Objective {
        match self {
            Model::Mlp { model, .. } => model,
            Model::Quadratic { objective, .. } => objective,
            Model::Basin { objective, .. } => objective,
        }
    }

    pub fn initial_params(&self, seed: u64) -> Result<ParamVector> {
        Ok(match self {
            Model::Mlp { model, .. } => model.init_params(seed),
            Model::Quadratic { start, .. } | Model::Basin { start, .. } => ParamVector::new(start.clone())?,
        })
    }

    /// Training rows, or `None` for objectives that ignore batches.
    pub fn train_rows(&self) -> Option<usize> {
        match self {
            Model::Mlp { model, .. } => Some(model.data().len()),
            _ => None,
        }
    }

    /// Held-out loss and accuracy for classifiers; the objective value
    /// otherwise.
    pub fn evaluate(&self, w: &[f64]) -> Result<(f64, Option<f64>)> {
        match self {
            Model::Mlp { model, test } => {
                let (loss, acc) = model.evaluate(w, test)?;
                Ok((loss, Some(acc)))
            }
            _ => Ok((eval_loss(self.objective(), w, &Minibatch::unit())?, None)),
        }
    }
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<(Dataset, Dataset)> {
    let full = match &spec.source {
        DataSource::TwoMoons { n, noise } => gen_two_moons(*n, *noise, spec.seed)?,
        DataSource::Blobs { n, centers, sd } => gen_blobs(*n, centers, *sd, spec.seed)?,
        DataSource::Csv { path, has_header, label_column } => load_csv(path, *has_header, *label_column)?,
        DataSource::Idx { images, labels } => load_idx(images, labels)?,
    };
    let (train, test) = full.split(spec.test_fraction, spec.seed)?;
    if spec.standardize {
        let z = Standardizer::fit(&train);
        Ok((z.apply(&train)?, z.apply(&test)?))
    } else {
        Ok((train, test))
    }
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<Model> {
    Ok(match &cfg.objective {
        ObjectiveSpec::Mlp { hidden, activation } => {
            let spec = cfg.dataset.as_ref().ok_or_else(|| CliError::Invalid("mlp needs a dataset".into()))?;
            let (train, test) = load_dataset(spec)?;
            let mut sizes = vec![train.dim()];
            sizes.extend(hidden);
            sizes.push(train.num_classes().max(test.num_classes()));
            Model::Mlp { model: MlpClassifier::new(sizes, *activation, Arc::new(train))?, test }
        }
        ObjectiveSpec::Quadratic { hessian, center, start, layers } => {
            let n = (hessian.len() as f64).sqrt().round() as usize;
            if n * n != hessian.len() {
                return Err(CliError::config(0, "objective.hessian", "length is not a perfect square"));
            }
            let center = center.clone().unwrap_or_else(|| vec![0.0; n]);
            let mut objective =
                QuadraticObjective::new(DenseMatrix::new(n, hessian.clone())?, ParamVector::new(center)?)?;
            if let Some(sizes) = layers {
                objective = objective.with_partition(LayerPartition::from_sizes(sizes)?)?;
            }
            if start.len() != n {
                return Err(CliError::config(0, "objective.start", format!("expected {n} values")));
            }
            Model::Quadratic { objective, start: start.clone() }
        }
        ObjectiveSpec::Basin { start } => {
            if start.len() != 2 {
                return Err(CliError::config(0, "objective.start", "expected 2 values"));
            }
            Model::Basin { objective: BasinLandscape::default_two_basin(), start: start.clone() }
        }
    })
}

pub fn method_name(method: Method, mode: PerturbationMode) -> &'static str {
    match (method, mode) {
        (Method::Base, _) => "base",
        (Method::Sam, PerturbationMode::Global) => "sam",
        (Method::Sam, PerturbationMode::Layerwise) => "layersam",
        (Method::SamK, _) => "sam_k",
        (Method::LookSam, PerturbationMode::Global) => "looksam",
        (Method::LookSam, PerturbationMode::Layerwise) => "look_layersam",
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
    pub final_params: ParamVector,
    pub trace: Option<StabilityTrace>,
}

fn digest_update(h: &mut Sha256, w: &[f64]) {
    for x in w {
        h.update(x.to_le_bytes());
    }
}

fn numeric(step: u64, e: flatopt::Error) -> CliError {
    match e {
        flatopt::Error::NonFinite => CliError::Numeric { step, reason: "non-finite values".into() },
        other => CliError::Library(other),
    }
}

/// Trains `model` as configured.
///
/// With `capture_trace` every full sharpness-aware step's gradient bundle is
/// recorded.
pub fn train(cfg: &ExperimentConfig, model: &Model, capture_trace: bool) -> Result<RunOutput> {
    let started = Instant::now();
    let obj = model.objective();
    let mut w = model.initial_params(cfg.seed)?;
    let mut state = OptimizerState::new();
    let mut sampler = match model.train_rows() {
        Some(n) => {
            let b = cfg.batch_size.unwrap_or(n);
            if b > n {
                return Err(CliError::config(0, "train.batch_size", format!("{b} exceeds the {n} training rows")));
            }
            Some((SamplerState::new(cfg.seed, n)?, b))
        }
        None => None,
    };
    let eval_every = cfg.eval_every.unwrap_or(match sampler {
        Some((_, b)) => (model.train_rows().unwrap_or(b) / b).max(1) as u64,
        None => 1,
    });
    let mut trace = capture_trace.then(StabilityTrace::new);
    let mut hasher = Sha256::new();
    digest_update(&mut hasher, &w);
    let mut records = Vec::new();
    let mut best_accuracy: Option<f64> = None;
    let mut last_train_loss = f64::NAN;
    for t in 0..cfg.steps {
        let tick = Instant::now();
        let (batch, epoch) = match &mut sampler {
            Some((s, b)) => (s.next_batch(*b)?, s.epoch()),
            None => (Minibatch::unit(), 0),
        };
        let report = step(cfg.method, obj, &mut w, &batch, &cfg.optimizer, &mut state).map_err(|e| numeric(t, e))?;
        if !report.loss.is_finite() {
            return Err(CliError::Numeric { step: t, reason: format!("loss is {}", report.loss) });
        }
        last_train_loss = report.loss;
        digest_update(&mut hasher, &w);
        if let (Some(tr), Some(bundle)) = (trace.as_mut(), report.bundle.as_ref()) {
            tr.push(t, bundle.clone())?;
        }
        let done = t + 1;
        if done % eval_every == 0 || done == cfg.steps {
            let (eval_loss, eval_accuracy) = model.evaluate(&w).map_err(|e| match e {
                CliError::Library(e) => numeric(t, e),
                other => other,
            })?;
            if !eval_loss.is_finite() {
                return Err(CliError::Numeric { step: t, reason: format!("eval loss is {eval_loss}") });
            }
            if let Some(a) = eval_accuracy {
                best_accuracy = Some(best_accuracy.map_or(a, |b| b.max(a)));
            }
            records.push(MetricsRecord {
                step: done,
                epoch,
                train_loss: report.loss,
                eval_loss,
                eval_accuracy,
                lr: report.lr,
                grad_evals: state.grad_evals,
                grad_norm: report.grad_norm,
                gv_norm: report.gv_norm,
                cos_theta: report.bundle.as_ref().map(|b| b.cos_theta),
                wall_ms: tick.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    let last = records.last();
    let summary = Summary {
        method: method_name(cfg.method, cfg.optimizer.sharpness.mode).to_string(),
        seed: cfg.seed,
        steps: cfg.steps,
        final_train_loss: last_train_loss,
        final_eval_loss: last.map_or(f64::NAN, |r| r.eval_loss),
        final_accuracy: last.and_then(|r| r.eval_accuracy),
        best_accuracy,
        grad_evals: state.grad_evals,
        trajectory_digest: hex::encode(hasher.finalize()),
        total_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RunOutput { records, summary, final_params: w, trace })
}

pub fn run_experiment(cfg: &ExperimentConfig, capture_trace: bool) -> Result<RunOutput> {
    let model = build_model(cfg)?;
    train(cfg, &model, capture_trace)
}
