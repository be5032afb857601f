//! Sharpness-aware minimization with gradient reuse and layer-wise
//! perturbation scaling, plus the objectives, data plumbing and analysis
//! tools needed to test it.

pub mod analysis;
pub mod data;
pub mod error;
pub mod objectives;
pub mod optimizers;
pub mod params;

pub use error::{Error, Result};
pub use params::{GradientVector, LayerPartition, ParamVector};
