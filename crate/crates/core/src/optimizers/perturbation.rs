//! Weight perturbations and the parallel/orthogonal split of the
//! sharpness-aware gradient.

use crate::error::{Error, Result};
use crate::params::{dot_unchecked, ensure_finite, ensure_same_len, sum_squares, GradientVector, LayerPartition};

fn norm(v: &[f64]) -> f64 {
    sum_squares(v).sqrt()
}

/// `ε̂ = ρ g / ‖g‖`.
pub fn compute_perturbation(g: &[f64], rho: f64) -> Result<GradientVector> {
    ensure_finite(g)?;
    let n = norm(g);
    if n == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let s = rho / n;
    GradientVector::new(g.iter().map(|x| s * x).collect())
}

/// Per-layer trust ratios `‖w⁽ⁱ⁾‖ / ‖g⁽ⁱ⁾‖`, with 0 for layers whose gradient
/// vanishes.
pub fn layer_trust_ratios(g: &[f64], w: &[f64], part: &LayerPartition) -> Result<Vec<f64>> {
    ensure_same_len(g, w)?;
    part.check_covers(g.len())?;
    Ok(part
        .ranges()
        .iter()
        .map(|r| {
            let gn = norm(&g[r.clone()]);
            if gn == 0.0 {
                0.0
            } else {
                norm(&w[r.clone()]) / gn
            }
        })
        .collect())
}

/// Expands per-layer trust ratios into the per-parameter diagonal of `Λ`.
pub fn trust_ratio_diagonal(g: &[f64], w: &[f64], part: &LayerPartition) -> Result<Vec<f64>> {
    let ratios = layer_trust_ratios(g, w, part)?;
    let mut diag = vec![0.0; g.len()];
    for (r, ratio) in part.ranges().iter().zip(ratios) {
        diag[r.clone()].iter_mut().for_each(|d| *d = ratio);
    }
    Ok(diag)
}

/// Layer-wise scaled perturbation: layer `i` gets
/// `ρ · (‖w⁽ⁱ⁾‖ / ‖g⁽ⁱ⁾‖) · g⁽ⁱ⁾ / ‖g‖`. A layer with zero gradient gets a
/// zero slice.
pub fn compute_layerwise_perturbation(g: &[f64], w: &[f64], part: &LayerPartition, rho: f64) -> Result<GradientVector> {
    ensure_finite(g)?;
    ensure_finite(w)?;
    let ratios = layer_trust_ratios(g, w, part)?;
    let n = norm(g);
    if n == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let mut eps = vec![0.0; g.len()];
    for (r, ratio) in part.ranges().iter().zip(ratios) {
        let s = rho * ratio / n;
        for (e, x) in eps[r.clone()].iter_mut().zip(&g[r.clone()]) {
            *e = s * x;
        }
    }
    GradientVector::new(eps)
}

/// General `(p, q)` form: `ε̃ = ρ · sign(g) · Λ · |g|^(q−1) / (‖g‖_q^q)^(1/p)`,
/// elementwise, with `Λ` given by its diagonal.
pub fn general_perturbation_pq(g: &[f64], lambda_diag: &[f64], rho: f64, p: f64, q: f64) -> Result<GradientVector> {
    check_dual_exponents(p, q)?;
    ensure_same_len(g, lambda_diag)?;
    ensure_finite(g)?;
    let q_norm_q: f64 = if q == 2.0 { sum_squares(g) } else { g.iter().fold(0.0, |acc, x| acc + x.abs().powf(q)) };
    if q_norm_q == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let denom = if p == 2.0 { q_norm_q.sqrt() } else { q_norm_q.powf(1.0 / p) };
    let eps = g
        .iter()
        .zip(lambda_diag)
        .map(|(&x, &lam)| {
            if x == 0.0 {
                return 0.0;
            }
            // q = 2 keeps |g|^(q-1) exact
            let mag = if q == 2.0 { x.abs() } else { x.abs().powf(q - 1.0) };
            rho * x.signum() * lam * mag / denom
        })
        .collect();
    GradientVector::new(eps)
}

pub(crate) fn check_dual_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::invalid("p, q", format!("exponents must be finite and > 1, got p = {p}, q = {q}")));
    }
    if (1.0 / p + 1.0 / q - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("p, q", format!("1/p + 1/q must equal 1, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// One step's gradient decomposition.
///
/// `g_h` is the component of `g_s` parallel to the plain gradient `g` and
/// `g_v = g_s − g_h` the orthogonal remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub g: GradientVector,
    pub g_s: GradientVector,
    pub g_h: GradientVector,
    pub g_v: GradientVector,
    pub cos_theta: f64,
    /// Set when `g` vanished and the perturbation was skipped (`g_s = g`,
    /// `g_v = 0`).
    pub degenerate: bool,
}

impl GradientBundle {
    pub(crate) fn degenerate(g: GradientVector) -> Self {
        let zeros = GradientVector::from_vec_unchecked(vec![0.0; g.len()]);
        Self { g_s: g.clone(), g_h: g.clone(), g_v: zeros, g, cos_theta: 1.0, degenerate: true }
    }
}

/// Splits `g_s` into parts parallel and orthogonal to `g`.
///
/// `g_v = g_s − ‖g_s‖ cos θ · ĝ`. A second projection pass removes the
/// rounding residue along `ĝ` so orthogonality holds to working precision
/// even when `g_s` is nearly parallel to `g`.
pub fn decompose_gradient(g: &GradientVector, g_s: &GradientVector) -> Result<GradientBundle> {
    ensure_same_len(g, g_s)?;
    let g_norm = norm(g);
    if g_norm == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let gs_norm = norm(g_s);
    let len = g.len();
    if gs_norm == 0.0 {
        let zeros = || GradientVector::from_vec_unchecked(vec![0.0; len]);
        return Ok(GradientBundle {
            g: g.clone(),
            g_s: g_s.clone(),
            g_h: zeros(),
            g_v: zeros(),
            cos_theta: 1.0,
            degenerate: false,
        });
    }
    let unit: Vec<f64> = g.iter().map(|x| x / g_norm).collect();
    let cos_theta = (dot_unchecked(g, g_s) / (g_norm * gs_norm)).clamp(-1.0, 1.0);
    let along = gs_norm * cos_theta;
    let mut g_h: Vec<f64> = unit.iter().map(|u| along * u).collect();
    let mut g_v: Vec<f64> = g_s.iter().zip(&g_h).map(|(s, h)| s - h).collect();
    let residue = dot_unchecked(&g_v, &unit);
    for ((v, h), u) in g_v.iter_mut().zip(g_h.iter_mut()).zip(&unit) {
        *v -= residue * u;
        *h += residue * u;
    }
    Ok(GradientBundle {
        g: g.clone(),
        g_s: g_s.clone(),
        g_h: GradientVector::new(g_h)?,
        g_v: GradientVector::new(g_v)?,
        cos_theta,
        degenerate: false,
    })
}

/// Approximate sharpness-aware gradient from a cached orthogonal component:
/// `g + α (‖g‖ / ‖g_v‖) g_v`, or `g` itself when `g_v` vanishes.
pub fn reuse_gradient(g: &GradientVector, cached_g_v: &GradientVector, alpha: f64) -> Result<GradientVector> {
    ensure_same_len(g, cached_g_v)?;
    let gv_norm = norm(cached_g_v);
    if gv_norm == 0.0 {
        return Ok(g.clone());
    }
    let s = alpha * norm(g) / gv_norm;
    GradientVector::new(g.iter().zip(cached_g_v.iter()).map(|(a, v)| a + s * v).collect())
}

/// Rescales `g` onto the `max_norm` sphere when it lies outside it.
pub fn clip_global_norm(g: &GradientVector, max_norm: f64) -> Result<GradientVector> {
    if max_norm.is_nan() || max_norm <= 0.0 {
        return Err(Error::invalid("max_norm", "must be positive"));
    }
    let n = norm(g);
    if n <= max_norm {
        return Ok(g.clone());
    }
    let s = max_norm / n;
    GradientVector::new(g.iter().map(|x| s * x).collect())
}
