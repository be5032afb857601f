use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

use super::{rng_from_seed, Dataset};

/// Two interleaving unit half-circles, `n / 2` points each.
///
/// Class 0 lies on the upper half circle centred at the origin, class 1 on
/// the lower half circle centred at `(1, 0.5)`. Angles are evenly spaced;
/// `noise_sd` adds isotropic Gaussian noise, and rows are shuffled with the
/// seeded generator.
pub fn gen_two_moons(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::invalid("n", format!("two moons needs an even count >= 2, got {n}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid("noise_sd", "must be finite and >= 0"));
    }
    let half = n / 2;
    let angle = |i: usize| if half == 1 { 0.0 } else { std::f64::consts::PI * i as f64 / (half - 1) as f64 };
    let mut points: Vec<([f64; 2], usize)> = Vec::with_capacity(n);
    for i in 0..half {
        let t = angle(i);
        points.push(([t.cos(), t.sin()], 0));
    }
    for i in 0..half {
        let t = angle(i);
        points.push(([1.0 - t.cos(), 0.5 - t.sin()], 1));
    }

    let mut rng = rng_from_seed(seed);
    points.shuffle(&mut rng);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (p, label) in points {
        for x in p {
            let eps: f64 = StandardNormal.sample(&mut rng);
            features.push(x + noise_sd * eps);
        }
        labels.push(label);
    }
    Dataset::new(features, 2, labels, 2)
}

/// Isotropic Gaussian blobs; point `i` belongs to class `i % centers.len()`.
pub fn gen_blobs(n: usize, centers: &[Vec<f64>], sd: f64, seed: u64) -> Result<Dataset> {
    if centers.len() < 2 {
        return Err(Error::invalid("centers", "need at least two blob centres"));
    }
    let dim = centers[0].len();
    if dim == 0 || centers.iter().any(|c| c.len() != dim) {
        return Err(Error::invalid("centers", "all centres must share one non-zero dimension"));
    }
    if n < centers.len() {
        return Err(Error::invalid("n", "need at least one point per centre"));
    }
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::invalid("sd", "must be finite and >= 0"));
    }
    let mut rng = rng_from_seed(seed);
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % centers.len();
        for &c in &centers[class] {
            let eps: f64 = StandardNormal.sample(&mut rng);
            features.push(c + sd * eps);
        }
        labels.push(class);
    }
    Dataset::new(features, dim, labels, centers.len())
}
