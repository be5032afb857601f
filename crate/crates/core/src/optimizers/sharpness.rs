//! SAM, SAM-k, LookSAM, LayerSAM and Look-LayerSAM update rules.
//!
//! All variants share one control flow. At step `t` (counted from 0) a
//! "full" step evaluates the plain gradient `g`, perturbs the weights along
//! it, evaluates `g_s` at the perturbed point and caches the orthogonal part
//! `g_v`. Full steps happen when `t % k == 0`, so step 0 is always full and
//! the cache exists before any reuse. In between, LookSAM approximates `g_s`
//! from `g` and the cached `g_v`; SAM-k just descends along `g`.

use crate::data::Minibatch;
use crate::error::{Error, Result};
use crate::objectives::{eval_grad, Objective};
use crate::params::{GradientVector, ParamVector};

use super::base::{apply_base_step, BaseState, BaseStepper};
use super::perturbation::{
    check_dual_exponents, clip_global_norm, compute_layerwise_perturbation, compute_perturbation, decompose_gradient,
    reuse_gradient, GradientBundle,
};
use super::schedule::ScheduleConfig;

/// How the ascent perturbation is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationMode {
    /// `ρ ĝ`.
    Global,
    /// `ρ ĝ` rescaled per layer by `‖w⁽ⁱ⁾‖ / ‖g⁽ⁱ⁾‖`.
    Layerwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessConfig {
    pub rho: f64,
    pub alpha: f64,
    pub k: u64,
    pub mode: PerturbationMode,
    pub p: f64,
    pub q: f64,
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        Self { rho: 0.1, alpha: 0.7, k: 5, mode: PerturbationMode::Global, p: 2.0, q: 2.0 }
    }
}

impl SharpnessConfig {
    /// Defaults for layer-wise perturbation (`ρ = 1`).
    pub fn layerwise() -> Self {
        Self { rho: 1.0, mode: PerturbationMode::Layerwise, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid("rho", format!("must be positive, got {}", self.rho)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if self.k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        check_dual_exponents(self.p, self.q)
    }
}

/// Which update rule a training loop runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Base stepper on the plain gradient.
    Base,
    /// Full sharpness-aware step every iteration.
    Sam,
    /// Full step when `t % k == 0`, plain step otherwise.
    SamK,
    /// Full step when `t % k == 0`, reused `g_v` otherwise.
    LookSam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub base: BaseStepper,
    pub sharpness: SharpnessConfig,
    pub schedule: ScheduleConfig,
    /// Global-norm clip applied to the final descent direction.
    pub clip_norm: Option<f64>,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.sharpness.validate()?;
        self.schedule.validate()?;
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid("clip_norm", format!("must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub base: BaseState,
    pub cached_g_v: Option<GradientVector>,
    /// Steps taken so far.
    pub t: u64,
    /// Objective gradient evaluations so far.
    pub grad_evals: u64,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    fn eval_grad(
        &mut self,
        obj: &(impl Objective + ?Sized),
        w: &[f64],
        batch: &Minibatch,
    ) -> Result<(f64, GradientVector)> {
        let out = eval_grad(obj, w, batch)?;
        self.grad_evals += 1;
        Ok(out)
    }
}

/// What happened during one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Step index before the update.
    pub t: u64,
    /// Loss at the unperturbed weights.
    pub loss: f64,
    pub lr: f64,
    /// `‖g‖` of the plain minibatch gradient.
    pub grad_norm: f64,
    /// Present on full sharpness-aware steps.
    pub bundle: Option<GradientBundle>,
    /// Norm of the `g_v` used this step (fresh or cached), when any.
    pub gv_norm: Option<f64>,
    /// The direction handed to the base stepper, after clipping.
    pub direction: GradientVector,
}

/// Both gradient evaluations of a sharpness-aware step, decomposed.
///
/// The perturbation reuses the plain gradient `g` just computed. When `g`
/// vanishes the perturbation is skipped, `g_s = g` and the bundle is
/// flagged degenerate (one evaluation instead of two).
pub fn sam_gradient(
    obj: &(impl Objective + ?Sized),
    w: &[f64],
    batch: &Minibatch,
    cfg: &SharpnessConfig,
    state: &mut OptimizerState,
) -> Result<(f64, GradientBundle)> {
    let (loss, g) = state.eval_grad(obj, w, batch)?;
    let eps = match cfg.mode {
        PerturbationMode::Global => compute_perturbation(&g, cfg.rho),
        PerturbationMode::Layerwise => compute_layerwise_perturbation(&g, w, obj.partition(), cfg.rho),
    };
    let eps = match eps {
        Ok(e) => e,
        Err(Error::ZeroGradient) => return Ok((loss, GradientBundle::degenerate(g))),
        Err(e) => return Err(e),
    };
    let perturbed: Vec<f64> = w.iter().zip(eps.iter()).map(|(a, b)| a + b).collect();
    let (_, g_s) = state.eval_grad(obj, &perturbed, batch)?;
    Ok((loss, decompose_gradient(&g, &g_s)?))
}

fn descend(
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
    direction: GradientVector,
    lr: f64,
) -> Result<GradientVector> {
    let direction = match cfg.clip_norm {
        Some(c) => clip_global_norm(&direction, c)?,
        None => direction,
    };
    apply_base_step(&cfg.base, &direction, w, obj.partition(), &mut state.base, lr)?;
    if !w.is_finite() {
        return Err(Error::NonFinite);
    }
    state.t += 1;
    Ok(direction)
}

/// The shared step: `k` is the full-step period, `reuse` selects LookSAM's
/// correction on intermediate steps.
fn periodic_step(
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    batch: &Minibatch,
    cfg: &OptimizerConfig,
    sharp: &SharpnessConfig,
    state: &mut OptimizerState,
    reuse: bool,
) -> Result<StepReport> {
    let t = state.t;
    let lr = cfg.schedule.lr_at(t)?;
    let full = t.is_multiple_of(sharp.k) || (reuse && state.cached_g_v.is_none());
    if full {
        let (loss, bundle) = sam_gradient(obj, w, batch, sharp, state)?;
        state.cached_g_v = Some(bundle.g_v.clone());
        let grad_norm = bundle.g.norm();
        let gv_norm = Some(bundle.g_v.norm());
        let direction = descend(obj, w, cfg, state, bundle.g_s.clone(), lr)?;
        return Ok(StepReport { t, loss, lr, grad_norm, bundle: Some(bundle), gv_norm, direction });
    }
    let (loss, g) = state.eval_grad(obj, w, batch)?;
    let grad_norm = g.norm();
    let (direction, gv_norm) = if reuse {
        let cached = state.cached_g_v.as_ref().expect("full step fills the cache");
        (reuse_gradient(&g, cached, sharp.alpha)?, Some(cached.norm()))
    } else {
        (g, None)
    };
    let direction = descend(obj, w, cfg, state, direction, lr)?;
    Ok(StepReport { t, loss, lr, grad_norm, bundle: None, gv_norm, direction })
}

fn with_mode(cfg: &OptimizerConfig, mode: PerturbationMode, k: Option<u64>) -> SharpnessConfig {
    SharpnessConfig { mode, k: k.unwrap_or(cfg.sharpness.k), ..cfg.sharpness }
}

/// Base stepper on the plain gradient (one evaluation).
pub fn base_step(
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    batch: &Minibatch,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<StepReport> {
    let t = state.t;
    let lr = cfg.schedule.lr_at(t)?;
    let (loss, g) = state.eval_grad(obj, w, batch)?;
    let grad_norm = g.norm();
    let direction = descend(obj, w, cfg, state, g, lr)?;
    Ok(StepReport { t, loss, lr, grad_norm, bundle: None, gv_norm: None, direction })
}

/// SAM with a global perturbation: two evaluations per step.
pub fn sam_step(
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    batch: &Minibatch,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<StepReport> {
    let sharp = with_mode(cfg, PerturbationMode::Global, Some(1));
    periodic_step(obj, w, batch, cfg, &sharp, state, false)
}

/// SAM every `k`-th step, plain updates otherwise.
pub fn sam_k_step(
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    batch: &Minibatch,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<StepReport> {
    let sharp = with_mode(cfg, PerturbationMode::Global, None);
    periodic_step(obj, w, batch, cfg, &sharp, state, false)
}

/// LookSAM: full SAM every `k`-th step, `g + α (‖g‖/‖g_v‖) g_v` otherwise.
pub fn looksam_step(
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    batch: &Minibatch,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<StepReport> {
    let sharp = with_mode(cfg, PerturbationMode::Global, None);
    periodic_step(obj, w, batch, cfg, &sharp, state, true)
}

/// SAM with the layer-wise scaled perturbation.
pub fn layersam_step(
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    batch: &Minibatch,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<StepReport> {
    let sharp = with_mode(cfg, PerturbationMode::Layerwise, Some(1));
    periodic_step(obj, w, batch, cfg, &sharp, state, false)
}

/// LookSAM with the layer-wise scaled perturbation.
pub fn look_layersam_step(
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    batch: &Minibatch,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<StepReport> {
    let sharp = with_mode(cfg, PerturbationMode::Layerwise, None);
    periodic_step(obj, w, batch, cfg, &sharp, state, true)
}

/// Dispatches on `method`, taking the perturbation mode from
/// `cfg.sharpness.mode`.
pub fn step(
    method: Method,
    obj: &(impl Objective + ?Sized),
    w: &mut ParamVector,
    batch: &Minibatch,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<StepReport> {
    use PerturbationMode::*;
    match (method, cfg.sharpness.mode) {
        (Method::Base, _) => base_step(obj, w, batch, cfg, state),
        (Method::Sam, Global) => sam_step(obj, w, batch, cfg, state),
        (Method::Sam, Layerwise) => layersam_step(obj, w, batch, cfg, state),
        (Method::SamK, mode) => {
            let sharp = with_mode(cfg, mode, None);
            periodic_step(obj, w, batch, cfg, &sharp, state, false)
        }
        (Method::LookSam, Global) => looksam_step(obj, w, batch, cfg, state),
        (Method::LookSam, Layerwise) => look_layersam_step(obj, w, batch, cfg, state),
    }
}

/// Gradient evaluations after `steps` steps of `method` with period `k`.
pub fn expected_grad_evals(method: Method, steps: u64, k: u64) -> u64 {
    match method {
        Method::Base => steps,
        Method::Sam => 2 * steps,
        Method::SamK | Method::LookSam => steps + steps.div_ceil(k),
    }
}
