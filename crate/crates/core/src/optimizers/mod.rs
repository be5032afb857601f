//! Sharpness-aware optimizers over a pluggable first-order base stepper.

mod base;
mod perturbation;
mod schedule;
mod sharpness;

pub use base::{
    adamw_step, apply_base_step, lamb_step, lamb_trust_ratio, sgd_momentum_step, BaseState, BaseStepper,
    LAMB_TRUST_MAX, LAMB_TRUST_MIN,
};
pub use perturbation::{
    clip_global_norm, compute_layerwise_perturbation, compute_perturbation, decompose_gradient,
    general_perturbation_pq, layer_trust_ratios, reuse_gradient, trust_ratio_diagonal, GradientBundle,
};
pub use schedule::{lr_at, Decay, ScheduleConfig};
pub use sharpness::{
    base_step, expected_grad_evals, layersam_step, look_layersam_step, looksam_step, sam_gradient, sam_k_step,
    sam_step, step, Method, OptimizerConfig, OptimizerState, PerturbationMode, SharpnessConfig, StepReport,
};
