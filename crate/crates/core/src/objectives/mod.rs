//! Differentiable objectives the optimizers train against.

mod basin;
mod matrix;
mod mlp;
mod quadratic;

pub use basin::BasinLandscape;
pub use matrix::{DenseMatrix, HessianAccess};
pub use mlp::{Activation, MlpClassifier};
pub use quadratic::QuadraticObjective;

use crate::data::Minibatch;
use crate::error::{Error, Result};
use crate::params::{GradientVector, LayerPartition};

/// A batch-mean loss with an analytic gradient.
///
/// `loss_and_grad(w, b).0` must be bit-identical to `loss(w, b)`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn partition(&self) -> &LayerPartition;

    fn loss(&self, w: &[f64], batch: &Minibatch) -> Result<f64>;

    fn loss_and_grad(&self, w: &[f64], batch: &Minibatch) -> Result<(f64, GradientVector)>;
}

fn check_dim(obj: &(impl Objective + ?Sized), w: &[f64]) -> Result<()> {
    if w.len() != obj.dim() {
        return Err(Error::LengthMismatch { expected: obj.dim(), found: w.len() });
    }
    Ok(())
}

pub fn eval_loss(obj: &(impl Objective + ?Sized), w: &[f64], batch: &Minibatch) -> Result<f64> {
    check_dim(obj, w)?;
    obj.loss(w, batch)
}

pub fn eval_grad(obj: &(impl Objective + ?Sized), w: &[f64], batch: &Minibatch) -> Result<(f64, GradientVector)> {
    check_dim(obj, w)?;
    let (loss, grad) = obj.loss_and_grad(w, batch)?;
    if grad.len() != obj.dim() {
        return Err(Error::LengthMismatch { expected: obj.dim(), found: grad.len() });
    }
    Ok((loss, grad))
}

/// Central differences `(L(w + h e_j) - L(w - h e_j)) / 2h`, one coordinate
/// at a time.
pub fn finite_diff_grad(
    obj: &(impl Objective + ?Sized),
    w: &[f64],
    batch: &Minibatch,
    h: f64,
) -> Result<GradientVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("step must be positive, got {h}")));
    }
    check_dim(obj, w)?;
    let mut probe = w.to_vec();
    let mut grad = Vec::with_capacity(w.len());
    for j in 0..w.len() {
        probe[j] = w[j] + h;
        let up = obj.loss(&probe, batch)?;
        probe[j] = w[j] - h;
        let down = obj.loss(&probe, batch)?;
        probe[j] = w[j];
        grad.push((up - down) / (2.0 * h));
    }
    GradientVector::new(grad)
}
