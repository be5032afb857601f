//! PAC-Bayes generalization bound for perturbed weights.

use crate::error::{Error, Result};

/// Inputs to the bound. `dim` is the parameter count, unrelated to the
/// reuse period `k` of the optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    n: u64,
    delta: f64,
    dim: u64,
    w_norm2_sq: f64,
    rho: f64,
    rho0: f64,
}

impl BoundInputs {
    pub fn new(n: u64, delta: f64, dim: u64, w_norm2_sq: f64, rho: f64, rho0: f64) -> Result<Self> {
        if n <= 1 {
            return Err(Error::invalid("n", format!("must exceed 1, got {n}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(w_norm2_sq >= 0.0 && w_norm2_sq.is_finite()) {
            return Err(Error::invalid("w_norm2_sq", format!("must be finite and >= 0, got {w_norm2_sq}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", format!("must be positive, got {rho}")));
        }
        if !(rho0 >= 0.0 && rho0.is_finite()) {
            return Err(Error::invalid("rho0", format!("must be finite and >= 0, got {rho0}")));
        }
        Ok(Self { n, delta, dim, w_norm2_sq, rho, rho0 })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> u64 {
        self.dim
    }

    pub fn w_norm2_sq(&self) -> f64 {
        self.w_norm2_sq
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    /// `ρ′² = ρ² + ρ₀²`.
    pub fn rho_prime_sq(&self) -> f64 {
        self.rho * self.rho + self.rho0 * self.rho0
    }
}

/// The additive pieces under the square root, before division by `n − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `dim · ln(1 + (‖w‖²/ρ′²)(1 + √(ln n / dim))²)`
    pub complexity: f64,
    /// `4 ln(n/δ)`
    pub confidence: f64,
    /// `8 ln(6n + 3 dim)`
    pub union: f64,
    pub denominator: f64,
    pub value: f64,
}

pub fn pac_bound_terms(b: &BoundInputs) -> BoundTerms {
    let n = b.n as f64;
    let dim = b.dim as f64;
    let spread = 1.0 + (n.ln() / dim).sqrt();
    let complexity = dim * (b.w_norm2_sq / b.rho_prime_sq() * spread * spread).ln_1p();
    let confidence = 4.0 * (n / b.delta).ln();
    let union = 8.0 * (6.0 * n + 3.0 * dim).ln();
    let denominator = n - 1.0;
    let value = ((complexity + confidence + union) / denominator).sqrt();
    BoundTerms { complexity, confidence, union, denominator, value }
}

pub fn pac_bound(b: &BoundInputs) -> f64 {
    pac_bound_terms(b).value
}

/// `ρ₀ = σ₀ √dim (1 + √(ln n / dim))`.
pub fn rho0_from_sigma0(sigma0: f64, n: u64, dim: u64) -> Result<f64> {
    if !(sigma0 >= 0.0 && sigma0.is_finite()) {
        return Err(Error::invalid("sigma0", format!("must be finite and >= 0, got {sigma0}")));
    }
    if n <= 1 || dim == 0 {
        return Err(Error::invalid("n", "need n > 1 and dim >= 1"));
    }
    let dim = dim as f64;
    Ok(sigma0 * dim.sqrt() * (1.0 + ((n as f64).ln() / dim).sqrt()))
}
