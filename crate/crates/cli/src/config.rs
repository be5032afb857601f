//! `key = value` experiment configs with `#` comments and dotted keys.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flatopt::objectives::Activation;
use flatopt::optimizers::{
    BaseStepper, Decay, Method, OptimizerConfig, PerturbationMode, ScheduleConfig, SharpnessConfig,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed but untyped config lines. Overrides carry line 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
    base_dir: Option<PathBuf>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::config(line, content, "expected `key = value`"));
            };
            let key = key.trim();
            if key.is_empty() || key.split('.').any(str::is_empty) {
                return Err(CliError::config(line, key, "malformed key"));
            }
            let entry = Entry { line, value: value.trim().to_string() };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(CliError::config(line, key, format!("duplicate key, first set on line {}", prev.line)));
            }
        }
        Ok(Self { entries, base_dir: None })
    }

    /// Reads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut raw = Self::parse(&text)?;
        raw.base_dir = path.parent().map(Path::to_path_buf);
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), Entry { line: 0, value: value.into() });
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }
}

/// Tracks which keys were read so leftovers can be reported.
struct Reader<'a> {
    raw: &'a RawConfig,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Reader<'a> {
    fn new(raw: &'a RawConfig) -> Self {
        Self { raw, used: RefCell::new(BTreeSet::new()) }
    }

    fn err(&self, key: &str, reason: impl Into<String>) -> CliError {
        CliError::config(self.raw.line_of(key), key, reason)
    }

    fn str(&self, key: &str) -> Option<&'a str> {
        self.used.borrow_mut().insert(key.to_string());
        self.raw.get(key)
    }

    fn required(&self, key: &str) -> Result<&'a str> {
        self.str(key).ok_or_else(|| CliError::config(0, key, "required key is missing"))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.str(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse().map_err(|e| self.err(key, format!("cannot parse `{}`: {e}", s.trim()))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        let p = PathBuf::from(self.required(key)?);
        let p = match (&self.raw.base_dir, p.is_relative()) {
            (Some(dir), true) => dir.join(p),
            _ => p,
        };
        if !p.exists() {
            return Err(self.err(key, format!("file {} does not exist", p.display())));
        }
        Ok(p)
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.raw.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    Mlp { hidden: Vec<usize>, activation: Activation },
    Quadratic { hessian: Vec<f64>, center: Option<Vec<f64>>, start: Vec<f64>, layers: Option<Vec<usize>> },
    Basin { start: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    TwoMoons { n: usize, noise: f64 },
    Blobs { n: usize, centers: Vec<Vec<f64>>, sd: f64 },
    Csv { path: PathBuf, has_header: bool, label_column: usize },
    Idx { images: PathBuf, labels: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub source: DataSource,
    pub test_fraction: f64,
    pub standardize: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub dataset: Option<DatasetSpec>,
    pub method: Method,
    pub optimizer: OptimizerConfig,
    pub steps: u64,
    pub batch_size: Option<usize>,
    pub eval_every: Option<u64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    raw: RawConfig,
}

fn parse_method(s: &str) -> Option<(Method, Option<PerturbationMode>)> {
    use PerturbationMode::*;
    Some(match s {
        "base" | "sgd" => (Method::Base, None),
        "sam" => (Method::Sam, None),
        "sam_k" | "samk" => (Method::SamK, None),
        "looksam" => (Method::LookSam, None),
        "layersam" => (Method::Sam, Some(Layerwise)),
        "look_layersam" | "looklayersam" => (Method::LookSam, Some(Layerwise)),
        _ => return None,
    })
}

/// Config key for a library argument name, used to point validation errors
/// at the offending line.
fn key_for(name: &str) -> &'static str {
    match name {
        "rho" => "optimizer.rho",
        "alpha" => "optimizer.alpha",
        "k" => "optimizer.k",
        "p" | "q" | "p, q" => "optimizer.p",
        "momentum" => "optimizer.momentum",
        "weight_decay" => "optimizer.weight_decay",
        "beta1" => "optimizer.beta1",
        "beta2" => "optimizer.beta2",
        "eps" => "optimizer.eps",
        "clip_norm" => "optimizer.clip_norm",
        "peak_lr" => "schedule.peak_lr",
        "warmup_steps" => "schedule.warmup_steps",
        "total_steps" => "train.steps",
        _ => "optimizer",
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_raw(RawConfig::load(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    /// Re-parses with `key` replaced by `value`.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut raw = self.raw.clone();
        raw.set(key, value);
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let r = Reader::new(&raw);
        let seed = r.or("seed", 0u64)?;
        let output = r.str("output").map(PathBuf::from);

        let kind = r.required("objective.kind")?;
        let objective = match kind {
            "mlp" => ObjectiveSpec::Mlp {
                hidden: r.list("objective.hidden")?.unwrap_or_else(|| vec![16]),
                activation: r.or("objective.activation", Activation::Tanh)?,
            },
            "quadratic" => {
                let hessian = match (r.list::<f64>("objective.diag")?, r.list::<f64>("objective.hessian")?) {
                    (Some(d), None) => {
                        let n = d.len();
                        let mut h = vec![0.0; n * n];
                        for (i, v) in d.into_iter().enumerate() {
                            h[i * n + i] = v;
                        }
                        h
                    }
                    (None, Some(h)) => h,
                    _ => return Err(r.err("objective.diag", "set exactly one of objective.diag, objective.hessian")),
                };
                ObjectiveSpec::Quadratic {
                    hessian,
                    center: r.list("objective.center")?,
                    start: r
                        .list("objective.start")?
                        .ok_or_else(|| r.err("objective.start", "required key is missing"))?,
                    layers: r.list("objective.layers")?,
                }
            }
            "basin" => ObjectiveSpec::Basin { start: r.list("objective.start")?.unwrap_or_else(|| vec![0.0, 0.0]) },
            other => return Err(r.err("objective.kind", format!("expected mlp, quadratic or basin, got `{other}`"))),
        };

        let dataset = match r.str("dataset.source") {
            None => None,
            Some(src) => {
                let source = match src {
                    "two_moons" => {
                        DataSource::TwoMoons { n: r.or("dataset.n", 1000)?, noise: r.or("dataset.noise", 0.1)? }
                    }
                    "blobs" => {
                        let spec = r.required("dataset.centers")?;
                        let centers = spec
                            .split(';')
                            .map(|c| {
                                c.split(',')
                                    .map(|x| x.trim().parse::<f64>())
                                    .collect::<std::result::Result<Vec<_>, _>>()
                                    .map_err(|e| r.err("dataset.centers", e.to_string()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        DataSource::Blobs { n: r.or("dataset.n", 1000)?, centers, sd: r.or("dataset.sd", 1.0)? }
                    }
                    "csv" => DataSource::Csv {
                        path: r.path("dataset.path")?,
                        has_header: r.or("dataset.header", false)?,
                        label_column: r
                            .parse("dataset.label_column")?
                            .ok_or_else(|| CliError::config(0, "dataset.label_column", "required key is missing"))?,
                    },
                    "idx" => DataSource::Idx { images: r.path("dataset.images")?, labels: r.path("dataset.labels")? },
                    other => {
                        return Err(
                            r.err("dataset.source", format!("expected two_moons, blobs, csv or idx, got `{other}`"))
                        )
                    }
                };
                Some(DatasetSpec {
                    source,
                    test_fraction: r.or("dataset.test_fraction", 0.2)?,
                    standardize: r.or("dataset.standardize", false)?,
                    seed: r.or("dataset.seed", seed)?,
                })
            }
        };
        match (&objective, &dataset) {
            (ObjectiveSpec::Mlp { .. }, None) => {
                return Err(CliError::config(0, "dataset.source", "mlp needs a dataset"))
            }
            (ObjectiveSpec::Quadratic { .. } | ObjectiveSpec::Basin { .. }, Some(_)) => {
                return Err(r.err("dataset.source", "this objective does not read data"))
            }
            _ => {}
        }

        let method_name = r.or("optimizer.method", "sam".to_string())?;
        let (method, implied_mode) = parse_method(&method_name)
            .ok_or_else(|| r.err("optimizer.method", format!("unknown method `{method_name}`")))?;
        let mode = match (r.str("optimizer.mode"), implied_mode) {
            (None, m) => m.unwrap_or(PerturbationMode::Global),
            (Some("global"), Some(PerturbationMode::Layerwise)) => {
                return Err(r.err("optimizer.mode", format!("conflicts with method `{method_name}`")))
            }
            (Some("global"), _) => PerturbationMode::Global,
            (Some("layerwise"), _) => PerturbationMode::Layerwise,
            (Some(other), _) => {
                return Err(r.err("optimizer.mode", format!("expected global or layerwise, got `{other}`")))
            }
        };
        let defaults = match mode {
            PerturbationMode::Global => SharpnessConfig::default(),
            PerturbationMode::Layerwise => SharpnessConfig::layerwise(),
        };
        let sharpness = SharpnessConfig {
            rho: r.or("optimizer.rho", defaults.rho)?,
            alpha: r.or("optimizer.alpha", defaults.alpha)?,
            k: r.or("optimizer.k", defaults.k)?,
            mode,
            p: r.or("optimizer.p", 2.0)?,
            q: r.or("optimizer.q", 2.0)?,
        };
        let weight_decay = r.or("optimizer.weight_decay", 0.0)?;
        let base = match r.or("optimizer.base", "sgd".to_string())?.as_str() {
            "sgd" => BaseStepper::SgdMomentum { momentum: r.or("optimizer.momentum", 0.9)?, weight_decay },
            name @ ("adamw" | "lamb") => {
                let (beta1, beta2, eps) =
                    (r.or("optimizer.beta1", 0.9)?, r.or("optimizer.beta2", 0.999)?, r.or("optimizer.eps", 1e-8)?);
                if name == "adamw" {
                    BaseStepper::AdamW { beta1, beta2, eps, weight_decay }
                } else {
                    BaseStepper::Lamb { beta1, beta2, eps, weight_decay }
                }
            }
            other => return Err(r.err("optimizer.base", format!("expected sgd, adamw or lamb, got `{other}`"))),
        };
        let steps: u64 =
            r.parse("train.steps")?.ok_or_else(|| CliError::config(0, "train.steps", "required key is missing"))?;
        let schedule = ScheduleConfig {
            warmup_steps: r.or("schedule.warmup_steps", 0)?,
            peak_lr: r.or("schedule.peak_lr", 0.05)?,
            decay: r.or("schedule.decay", Decay::Constant)?,
            total_steps: steps,
        };
        let optimizer = OptimizerConfig { base, sharpness, schedule, clip_norm: r.parse("optimizer.clip_norm")? };
        if let Err(e) = optimizer.validate() {
            let key = match &e {
                flatopt::Error::InvalidArgument { name, .. } => key_for(name),
                _ => "optimizer",
            };
            return Err(r.err(key, e.to_string()));
        }

        let batch_size: Option<usize> = r.parse("train.batch_size")?;
        if dataset.is_some() && batch_size.is_none() {
            return Err(CliError::config(0, "train.batch_size", "required when a dataset is configured"));
        }
        if batch_size == Some(0) {
            return Err(r.err("train.batch_size", "must be at least 1"));
        }
        let eval_every: Option<u64> = r.parse("train.eval_every")?;
        if eval_every == Some(0) {
            return Err(r.err("train.eval_every", "must be at least 1"));
        }
        r.finish()?;
        drop(r);
        Ok(Self { objective, dataset, method, optimizer, steps, batch_size, eval_every, seed, output, raw })
    }
}
