//! Gradient-stability measurement, second-order oracles and the
//! generalization bound evaluator.

mod bound;
mod probe;
mod theory;

pub use bound::{pac_bound, pac_bound_terms, rho0_from_sigma0, BoundInputs, BoundTerms};
pub use probe::{gv_stability_probe, spearman, ProbeRow, StabilityProbe, StabilityTrace, TraceRecord};
pub use theory::{gv_drift_bound, lambda0_value, sharpness_estimate, sigma0_heuristic, taylor_gv_estimate};
