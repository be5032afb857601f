use std::sync::Arc;

use rand::Rng as _;

use crate::data::{rng_from_seed, Dataset, Minibatch};
use crate::error::{Error, Result};
use crate::params::{GradientVector, LayerPartition, ParamVector};

use super::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation; ReLU′(0) = 0.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::invalid("activation", format!("expected tanh or relu, got `{other}`"))),
        }
    }
}

/// Fully connected softmax classifier with cross-entropy loss, trained on a
/// shared dataset.
///
/// Parameters are stored flat, layer by layer: the weight matrix (row-major,
/// `out × in`) followed by the bias vector. The layer partition has one range
/// per weight matrix and one per bias vector.
#[derive(Debug, Clone)]
pub struct MlpClassifier {
    sizes: Vec<usize>,
    activation: Activation,
    partition: LayerPartition,
    data: Arc<Dataset>,
}

struct Forward {
    /// Pre-activations per layer.
    pre: Vec<Vec<f64>>,
    /// Layer inputs: `inputs[0]` is the sample, `inputs[l]` the activation
    /// feeding layer `l`.
    inputs: Vec<Vec<f64>>,
    probs: Vec<f64>,
    loss: f64,
}

impl MlpClassifier {
    /// `sizes` runs from input width to class count, e.g. `[2, 16, 16, 2]`.
    pub fn new(sizes: Vec<usize>, activation: Activation, data: Arc<Dataset>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid("layer sizes", "need at least input and output widths, all positive"));
        }
        if sizes[0] != data.dim() {
            return Err(Error::invalid(
                "layer sizes",
                format!("input width {} does not match dataset dimension {}", sizes[0], data.dim()),
            ));
        }
        if sizes[sizes.len() - 1] != data.num_classes() {
            return Err(Error::invalid(
                "layer sizes",
                format!("output width {} does not match {} classes", sizes[sizes.len() - 1], data.num_classes()),
            ));
        }
        let layer_sizes: Vec<usize> = sizes.windows(2).flat_map(|p| [p[0] * p[1], p[1]]).collect();
        let partition = LayerPartition::from_sizes(&layer_sizes)?;
        Ok(Self { sizes, activation, partition, data })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = rng_from_seed(seed);
        let mut w = Vec::with_capacity(self.partition.len());
        for pair in self.sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)));
            w.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector::from_vec_unchecked(w)
    }

    fn check_input(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.partition.len() {
            return Err(Error::LengthMismatch { expected: self.partition.len(), found: w.len() });
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Minibatch, ds: &Dataset) -> Result<()> {
        if let Some(&bad) = batch.indices().iter().find(|&&i| i >= ds.len()) {
            return Err(Error::invalid("minibatch", format!("index {bad} out of range for {} rows", ds.len())));
        }
        Ok(())
    }

    fn forward(&self, w: &[f64], x: &[f64], label: usize) -> Forward {
        let depth = self.sizes.len() - 1;
        let mut pre = Vec::with_capacity(depth);
        let mut inputs = Vec::with_capacity(depth);
        let mut current = x.to_vec();
        let mut offset = 0;
        for l in 0..depth {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let weights = &w[offset..offset + n_in * n_out];
            let bias = &w[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    row.iter().zip(&current).fold(bias[o], |acc, (a, b)| acc + a * b)
                })
                .collect();
            inputs.push(std::mem::take(&mut current));
            current = if l + 1 < depth { z.iter().map(|&v| self.activation.apply(v)).collect() } else { z.clone() };
            pre.push(z);
        }
        let logits = &current;
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let probs = exps.iter().map(|e| e / sum).collect();
        // −log softmax_y, evaluated as logsumexp − z_y
        let loss = max + sum.ln() - logits[label];
        Forward { pre, inputs, probs, loss }
    }

    /// Class probabilities for one input row.
    pub fn predict_proba(&self, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(w)?;
        if x.len() != self.sizes[0] {
            return Err(Error::LengthMismatch { expected: self.sizes[0], found: x.len() });
        }
        Ok(self.forward(w, x, 0).probs)
    }

    /// Cross-entropy of training row `i`.
    pub fn sample_loss(&self, w: &[f64], i: usize) -> Result<f64> {
        self.check_input(w)?;
        if i >= self.data.len() {
            return Err(Error::invalid("row", format!("{i} out of range")));
        }
        Ok(self.forward(w, self.data.row(i), self.data.label(i)).loss)
    }

    /// Mean cross-entropy and accuracy over every row of `ds`.
    pub fn evaluate(&self, w: &[f64], ds: &Dataset) -> Result<(f64, f64)> {
        self.check_input(w)?;
        if ds.dim() != self.sizes[0] {
            return Err(Error::LengthMismatch { expected: self.sizes[0], found: ds.dim() });
        }
        if ds.num_classes() > self.sizes[self.sizes.len() - 1] {
            return Err(Error::invalid("dataset", "has more classes than the output layer"));
        }
        let mut loss = 0.0;
        let mut correct = 0usize;
        for i in 0..ds.len() {
            let label = ds.label(i);
            let f = self.forward(w, ds.row(i), label);
            loss += f.loss;
            let pred = f.probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
            if pred == ds.label(i) {
                correct += 1;
            }
        }
        Ok((loss / ds.len() as f64, correct as f64 / ds.len() as f64))
    }

    fn accumulate_grad(&self, w: &[f64], f: &Forward, label: usize, grad: &mut [f64]) {
        let depth = self.sizes.len() - 1;
        let mut delta: Vec<f64> = f.probs.clone();
        delta[label] -= 1.0;
        let mut offsets = Vec::with_capacity(depth);
        let mut offset = 0;
        for l in 0..depth {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        for l in (0..depth).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let base = offsets[l];
            let input = &f.inputs[l];
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut grad[base + o * n_in..base + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[base + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &w[base..base + n_in * n_out];
                let prev_pre = &f.pre[l - 1];
                let prev_act = input;
                delta = (0..n_in)
                    .map(|i| {
                        let back = (0..n_out).fold(0.0, |acc, o| acc + weights[o * n_in + i] * delta[o]);
                        back * self.activation.derivative(prev_pre[i], prev_act[i])
                    })
                    .collect();
            }
        }
    }
}

impl Objective for MlpClassifier {
    fn dim(&self) -> usize {
        self.partition.len()
    }

    fn partition(&self) -> &LayerPartition {
        &self.partition
    }

    fn loss(&self, w: &[f64], batch: &Minibatch) -> Result<f64> {
        self.check_input(w)?;
        self.check_batch(batch, &self.data)?;
        let total = batch
            .indices()
            .iter()
            .fold(0.0, |acc, &i| acc + self.forward(w, self.data.row(i), self.data.label(i)).loss);
        Ok(total / batch.len() as f64)
    }

    fn loss_and_grad(&self, w: &[f64], batch: &Minibatch) -> Result<(f64, GradientVector)> {
        self.check_input(w)?;
        self.check_batch(batch, &self.data)?;
        let mut grad = vec![0.0; w.len()];
        let mut total = 0.0;
        for &i in batch.indices() {
            let label = self.data.label(i);
            let f = self.forward(w, self.data.row(i), label);
            total += f.loss;
            self.accumulate_grad(w, &f, label, &mut grad);
        }
        let inv = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok((total / batch.len() as f64, GradientVector::new(grad)?))
    }
}
