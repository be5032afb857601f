use crate::data::Minibatch;
use crate::error::{Error, Result};
use crate::params::{GradientVector, LayerPartition, ParamVector};

use super::Objective;

/// Sum of inverted Gaussian wells:
/// `L(w) = offset − Σ a_i exp(−‖w − c_i‖² / (2 s_i²))`.
///
/// Small `s_i` gives a sharp basin, large `s_i` a flat one. The batch
/// argument is ignored.
#[derive(Debug, Clone)]
pub struct BasinLandscape {
    centers: Vec<ParamVector>,
    depths: Vec<f64>,
    widths: Vec<f64>,
    offset: f64,
    partition: LayerPartition,
}

impl BasinLandscape {
    pub fn new(centers: Vec<ParamVector>, depths: Vec<f64>, widths: Vec<f64>, offset: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("centers", "need at least one basin"));
        }
        if depths.len() != centers.len() || widths.len() != centers.len() {
            return Err(Error::invalid("basins", "centers, depths and widths must have equal length"));
        }
        let dim = centers[0].len();
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::invalid("centers", "all centres must share one dimension"));
        }
        if depths.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("depths", "must be positive"));
        }
        if widths.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("widths", "must be positive"));
        }
        if !offset.is_finite() {
            return Err(Error::invalid("offset", "must be finite"));
        }
        Ok(Self { centers, depths, widths, offset, partition: LayerPartition::single(dim)? })
    }

    /// Two unit-depth basins in 2-D: sharp (`s = 0.05`) at `(−1, 0)` and
    /// flat (`s = 0.5`) at `(+1, 0)`, offset 1.
    pub fn default_two_basin() -> Self {
        let c = |x: f64| ParamVector::new(vec![x, 0.0]).expect("finite centre");
        Self::new(vec![c(-1.0), c(1.0)], vec![1.0, 1.0], vec![0.05, 0.5], 1.0).expect("valid default landscape")
    }

    pub fn centers(&self) -> &[ParamVector] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    /// Index of the basin whose centre is closest to `w` in width-scaled
    /// distance `‖w − c_i‖ / s_i`.
    pub fn nearest_basin(&self, w: &[f64]) -> usize {
        (0..self.centers.len())
            .min_by(|&a, &b| self.scaled_sq_distance(w, a).total_cmp(&self.scaled_sq_distance(w, b)))
            .expect("at least one basin")
    }

    fn sq_distance(&self, w: &[f64], i: usize) -> f64 {
        w.iter().zip(self.centers[i].iter()).fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b))
    }

    fn scaled_sq_distance(&self, w: &[f64], i: usize) -> f64 {
        self.sq_distance(w, i) / (self.widths[i] * self.widths[i])
    }

    fn activation(&self, w: &[f64], i: usize) -> f64 {
        let s = self.widths[i];
        self.depths[i] * (-self.sq_distance(w, i) / (2.0 * s * s)).exp()
    }
}

impl Objective for BasinLandscape {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn partition(&self) -> &LayerPartition {
        &self.partition
    }

    fn loss(&self, w: &[f64], _batch: &Minibatch) -> Result<f64> {
        Ok((0..self.centers.len()).fold(self.offset, |acc, i| acc - self.activation(w, i)))
    }

    fn loss_and_grad(&self, w: &[f64], _batch: &Minibatch) -> Result<(f64, GradientVector)> {
        let mut loss = self.offset;
        let mut grad = vec![0.0; w.len()];
        for i in 0..self.centers.len() {
            let e = self.activation(w, i);
            loss -= e;
            let inv_s2 = 1.0 / (self.widths[i] * self.widths[i]);
            for ((g, wj), cj) in grad.iter_mut().zip(w).zip(self.centers[i].iter()) {
                *g += e * (wj - cj) * inv_s2;
            }
        }
        Ok((loss, GradientVector::new(grad)?))
    }
}
