//! Second-order quantities around the sharpness-aware gradient.

use crate::data::Minibatch;
use crate::error::{Error, Result};
use crate::objectives::{eval_grad, eval_loss, HessianAccess, Objective};
use crate::optimizers::compute_perturbation;
use crate::params::{dot_unchecked, ensure_finite, sum_squares, GradientVector};

fn unit(g: &[f64]) -> Result<Vec<f64>> {
    ensure_finite(g)?;
    let n = sum_squares(g).sqrt();
    if n == 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(g.iter().map(|x| x / n).collect())
}

fn check_dim(h: &(impl HessianAccess + ?Sized), g: &[f64]) -> Result<()> {
    if h.hessian_dim() != g.len() {
        return Err(Error::LengthMismatch { expected: h.hessian_dim(), found: g.len() });
    }
    Ok(())
}

/// Second-order estimate of the orthogonal gradient, `½ ρ H ĝ`.
pub fn taylor_gv_estimate(h: &(impl HessianAccess + ?Sized), g: &[f64], rho: f64) -> Result<GradientVector> {
    check_dim(h, g)?;
    let hg = h.hessian_vector(&unit(g)?)?;
    GradientVector::new(hg.iter().map(|x| 0.5 * rho * x).collect())
}

/// `‖½ ρ (H_t ĝ_t − H_{t+k} ĝ_{t+k})‖`.
pub fn gv_drift_bound(
    h_t: &(impl HessianAccess + ?Sized),
    g_t: &[f64],
    h_tk: &(impl HessianAccess + ?Sized),
    g_tk: &[f64],
    rho: f64,
) -> Result<f64> {
    let a = taylor_gv_estimate(h_t, g_t, rho)?;
    let b = taylor_gv_estimate(h_tk, g_tk, rho)?;
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), found: b.len() });
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// The multiplier `λ₀ = ρ ĝᵀHĝ` that makes `ρHĝ − λ₀ĝ` orthogonal to `g`.
pub fn lambda0_value(h: &(impl HessianAccess + ?Sized), g: &[f64], rho: f64) -> Result<f64> {
    check_dim(h, g)?;
    let u = unit(g)?;
    let hu = h.hessian_vector(&u)?;
    Ok(rho * dot_unchecked(&u, &hu))
}

/// One-ascent-step sharpness `L(w + ε̂) − L(w)`; 0 at a stationary point.
///
/// The ascent step can overshoot on nonconvex objectives, so the result may
/// be negative.
pub fn sharpness_estimate(obj: &(impl Objective + ?Sized), w: &[f64], batch: &Minibatch, rho: f64) -> Result<f64> {
    let (loss, g) = eval_grad(obj, w, batch)?;
    let eps = match compute_perturbation(&g, rho) {
        Ok(e) => e,
        Err(Error::ZeroGradient) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let perturbed: Vec<f64> = w.iter().zip(eps.iter()).map(|(a, b)| a + b).collect();
    Ok(eval_loss(obj, &perturbed, batch)? - loss)
}

/// Heuristic reuse-error scale: the population standard deviation of all
/// entries of `approx − exact` over the given pairs.
pub fn sigma0_heuristic(pairs: &[(GradientVector, GradientVector)]) -> Result<f64> {
    let mut diffs = Vec::new();
    for (approx, exact) in pairs {
        if approx.len() != exact.len() {
            return Err(Error::LengthMismatch { expected: exact.len(), found: approx.len() });
        }
        diffs.extend(approx.iter().zip(exact.iter()).map(|(a, e)| a - e));
    }
    if diffs.is_empty() {
        return Err(Error::Empty);
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    Ok((diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n).sqrt())
}
