//! Datasets, ingestion, synthetic generators and seeded minibatch sampling.

mod delimited;
mod idx;
mod sampler;
mod synthetic;

pub use delimited::{load_csv, write_csv};
pub use idx::{load_idx, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use sampler::{next_batch, SamplerState};
pub use synthetic::{gen_blobs, gen_two_moons};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The generator behind every seeded operation in the crate.
///
/// ChaCha with 8 rounds: a fixed, published algorithm whose output stream
/// for a given seed does not depend on platform or endianness.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Labelled examples stored row-major: `n` rows of `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if labels.is_empty() {
            return Err(Error::invalid("labels", "dataset needs at least one row"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::LengthMismatch { expected: labels.len() * dim, found: features.len() });
        }
        if num_classes < 2 {
            return Err(Error::invalid("num_classes", "must be at least 2"));
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::invalid(
                "labels",
                format!("row {row} has label {label} but there are only {num_classes} classes"),
            ));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { features, labels, dim, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Splits off the last `ceil(fraction * n)` rows of a seeded shuffle as a
    /// held-out set; returns `(train, held_out)`.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid("fraction", "must lie in (0, 1)"));
        }
        let n = self.len();
        let held = ((fraction * n as f64).ceil() as usize).min(n - 1);
        if held == 0 {
            return Err(Error::invalid("fraction", "held-out set would be empty"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng_from_seed(seed));
        let (a, b) = order.split_at(n - held);
        Ok((self.select(a)?, self.select(b)?))
    }

    fn select(&self, rows: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Dataset::new(features, self.dim, labels, self.num_classes)
    }
}

/// Distinct row indices into a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minibatch {
    indices: Vec<usize>,
}

impl Minibatch {
    /// Validates indices against a dataset of `n` rows.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("minibatch", "must contain at least one index"));
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::invalid("minibatch", format!("index {i} out of range for {n} rows")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("minibatch", format!("duplicate index {i}")));
            }
        }
        Ok(Self { indices })
    }

    /// Every row of an `n`-row dataset, in order.
    pub fn full(n: usize) -> Result<Self> {
        Self::new((0..n).collect(), n)
    }

    /// Placeholder batch for objectives that do not read data.
    pub fn unit() -> Self {
        Self { indices: vec![0] }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Per-column z-score statistics fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std_dev: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Self {
        let n = ds.len() as f64;
        let d = ds.dim();
        let mut mean = vec![0.0; d];
        for i in 0..ds.len() {
            for (m, x) in mean.iter_mut().zip(ds.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..ds.len() {
            for ((v, x), m) in var.iter_mut().zip(ds.row(i)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        // constant columns are centred but left unscaled
        let std_dev = var.iter().map(|v| (v / n).sqrt()).map(|s| if s > 0.0 { s } else { 1.0 }).collect();
        Self { mean, std_dev }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.mean.len() {
            return Err(Error::LengthMismatch { expected: self.mean.len(), found: ds.dim() });
        }
        let features = ds
            .features()
            .chunks(ds.dim())
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.std_dev).map(|((x, m), s)| (x - m) / s))
            .collect();
        Dataset::new(features, ds.dim(), ds.labels().to_vec(), ds.num_classes())
    }
}
