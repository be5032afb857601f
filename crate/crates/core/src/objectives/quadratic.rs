use crate::data::Minibatch;
use crate::error::{Error, Result};
use crate::params::{dot_unchecked, GradientVector, LayerPartition, ParamVector};

use super::{DenseMatrix, HessianAccess, Objective};

/// `L(w) = ½ (w − w*)ᵀ H (w − w*)`, so `∇L = H (w − w*)` and `∇²L = H`.
///
/// The batch argument is ignored.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    hessian: DenseMatrix,
    center: ParamVector,
    partition: LayerPartition,
}

impl QuadraticObjective {
    /// `hessian` must be symmetric to within `1e-12`; positive
    /// semi-definiteness is the caller's responsibility.
    pub fn new(hessian: DenseMatrix, center: ParamVector) -> Result<Self> {
        if hessian.n() != center.len() {
            return Err(Error::LengthMismatch { expected: hessian.n(), found: center.len() });
        }
        let asym = hessian.asymmetry();
        if asym > 1e-12 {
            return Err(Error::invalid("hessian", format!("not symmetric (max |H_ij - H_ji| = {asym:e})")));
        }
        let partition = LayerPartition::single(center.len())?;
        Ok(Self { hessian, center, partition })
    }

    pub fn with_partition(mut self, partition: LayerPartition) -> Result<Self> {
        partition.check_covers(self.center.len())?;
        self.partition = partition;
        Ok(self)
    }

    /// Centred at the origin with `H = diag(diag)`.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DenseMatrix::diagonal(diag)?, ParamVector::zeros(diag.len())?)
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.hessian
    }

    pub fn center(&self) -> &ParamVector {
        &self.center
    }

    fn offset(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(self.center.iter()).map(|(a, b)| a - b).collect()
    }

    /// `H v`.
    pub fn hessian_vector(&self, v: &[f64]) -> Result<GradientVector> {
        HessianAccess::hessian_vector(&self.hessian, v)
    }
}

impl HessianAccess for QuadraticObjective {
    fn hessian_dim(&self) -> usize {
        self.hessian.n()
    }

    fn hessian_vector(&self, v: &[f64]) -> Result<GradientVector> {
        HessianAccess::hessian_vector(&self.hessian, v)
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn partition(&self) -> &LayerPartition {
        &self.partition
    }

    fn loss(&self, w: &[f64], _batch: &Minibatch) -> Result<f64> {
        let d = self.offset(w);
        let hd = self.hessian.mul_vec(&d)?;
        Ok(0.5 * dot_unchecked(&d, &hd))
    }

    fn loss_and_grad(&self, w: &[f64], _batch: &Minibatch) -> Result<(f64, GradientVector)> {
        let d = self.offset(w);
        let hd = self.hessian.mul_vec(&d)?;
        let loss = 0.5 * dot_unchecked(&d, &hd);
        Ok((loss, GradientVector::new(hd)?))
    }
}
