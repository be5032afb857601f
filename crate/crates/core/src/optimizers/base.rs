//! First-order base steppers that consume the (possibly sharpness-aware)
//! descent direction.

use crate::error::{Error, Result};
use crate::params::{ensure_same_len, sum_squares, LayerPartition};

/// Bounds for the LAMB trust ratio.
pub const LAMB_TRUST_MIN: f64 = 1e-3;
pub const LAMB_TRUST_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseStepper {
    /// Heavy-ball momentum with coupled L2 weight decay.
    SgdMomentum { momentum: f64, weight_decay: f64 },
    /// Adam moments with decoupled weight decay.
    AdamW { beta1: f64, beta2: f64, eps: f64, weight_decay: f64 },
    /// AdamW direction rescaled per layer by `‖w⁽ⁱ⁾‖ / ‖u⁽ⁱ⁾‖`.
    Lamb { beta1: f64, beta2: f64, eps: f64, weight_decay: f64 },
}

impl BaseStepper {
    pub fn sgd(momentum: f64) -> Self {
        BaseStepper::SgdMomentum { momentum, weight_decay: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must lie in [0, 1), got {v}")))
            }
        };
        let non_negative = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        match *self {
            BaseStepper::SgdMomentum { momentum, weight_decay } => {
                unit("momentum", momentum)?;
                non_negative("weight_decay", weight_decay)
            }
            BaseStepper::AdamW { beta1, beta2, eps, weight_decay }
            | BaseStepper::Lamb { beta1, beta2, eps, weight_decay } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                non_negative("eps", eps)?;
                non_negative("weight_decay", weight_decay)
            }
        }
    }
}

/// Stepper buffers, sized lazily on the first update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaseState {
    /// Velocity (SGD) or first moment (AdamW/LAMB).
    pub first: Vec<f64>,
    /// Second moment (AdamW/LAMB).
    pub second: Vec<f64>,
    /// Number of updates applied.
    pub updates: u64,
}

impl BaseState {
    fn ensure(&mut self, len: usize, with_second: bool) -> Result<()> {
        if self.first.is_empty() {
            self.first = vec![0.0; len];
        }
        if with_second && self.second.is_empty() {
            self.second = vec![0.0; len];
        }
        if self.first.len() != len || (with_second && self.second.len() != len) {
            return Err(Error::LengthMismatch { expected: self.first.len(), found: len });
        }
        Ok(())
    }
}

/// `v ← μ v + (g + λ w)`, `w ← w − lr v`.
pub fn sgd_momentum_step(
    direction: &[f64],
    w: &mut [f64],
    state: &mut BaseState,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    ensure_same_len(direction, w)?;
    state.ensure(w.len(), false)?;
    for ((wi, vi), gi) in w.iter_mut().zip(state.first.iter_mut()).zip(direction) {
        *vi = momentum * *vi + gi + weight_decay * *wi;
        *wi -= lr * *vi;
    }
    state.updates += 1;
    Ok(())
}

/// Bias-corrected Adam direction plus decoupled decay, `m̂/(√v̂ + ε) + λ w`.
fn adaptive_direction(
    direction: &[f64],
    w: &[f64],
    state: &mut BaseState,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
) -> Result<Vec<f64>> {
    ensure_same_len(direction, w)?;
    state.ensure(w.len(), true)?;
    state.updates += 1;
    let t = state.updates as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    Ok(direction
        .iter()
        .zip(w)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
        .map(|((&g, &wi), (m, v))| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            m_hat / (v_hat.sqrt() + eps) + weight_decay * wi
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn adamw_step(
    direction: &[f64],
    w: &mut [f64],
    state: &mut BaseState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
) -> Result<()> {
    let update = adaptive_direction(direction, w, state, beta1, beta2, eps, weight_decay)?;
    for (wi, u) in w.iter_mut().zip(&update) {
        *wi -= lr * u;
    }
    Ok(())
}

/// `‖w‖ / ‖u‖` clamped to `[LAMB_TRUST_MIN, LAMB_TRUST_MAX]`; 1 when either
/// norm is zero.
pub fn lamb_trust_ratio(w: &[f64], update: &[f64]) -> f64 {
    let wn = sum_squares(w).sqrt();
    let un = sum_squares(update).sqrt();
    if wn == 0.0 || un == 0.0 {
        1.0
    } else {
        (wn / un).clamp(LAMB_TRUST_MIN, LAMB_TRUST_MAX)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn lamb_step(
    direction: &[f64],
    w: &mut [f64],
    part: &LayerPartition,
    state: &mut BaseState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
) -> Result<()> {
    part.check_covers(w.len())?;
    let update = adaptive_direction(direction, w, state, beta1, beta2, eps, weight_decay)?;
    for r in part.ranges() {
        let ratio = lamb_trust_ratio(&w[r.clone()], &update[r.clone()]);
        for (wi, u) in w[r.clone()].iter_mut().zip(&update[r.clone()]) {
            *wi -= lr * ratio * u;
        }
    }
    Ok(())
}

/// Applies whichever stepper `cfg` names.
pub fn apply_base_step(
    cfg: &BaseStepper,
    direction: &[f64],
    w: &mut [f64],
    part: &LayerPartition,
    state: &mut BaseState,
    lr: f64,
) -> Result<()> {
    match *cfg {
        BaseStepper::SgdMomentum { momentum, weight_decay } => {
            sgd_momentum_step(direction, w, state, lr, momentum, weight_decay)
        }
        BaseStepper::AdamW { beta1, beta2, eps, weight_decay } => {
            adamw_step(direction, w, state, lr, beta1, beta2, eps, weight_decay)
        }
        BaseStepper::Lamb { beta1, beta2, eps, weight_decay } => {
            lamb_step(direction, w, part, state, lr, beta1, beta2, eps, weight_decay)
        }
    }
}
