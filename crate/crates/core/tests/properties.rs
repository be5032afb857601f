use flatopt::analysis::{pac_bound, BoundInputs};
use flatopt::data::{Minibatch, SamplerState};
use flatopt::optimizers::{
    clip_global_norm, compute_layerwise_perturbation, compute_perturbation, decompose_gradient,
    general_perturbation_pq, reuse_gradient, trust_ratio_diagonal,
};
use flatopt::params::{layer_norms, norm2};
use flatopt::{GradientVector, LayerPartition};
use proptest::prelude::*;

fn vec_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_len)
}

fn nonzero(v: &[f64]) -> bool {
    v.iter().any(|x| x.abs() > 1e-3)
}

fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len)
        .prop_flat_map(|n| (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-10.0f64..10.0, n)))
}

fn gv(v: &[f64]) -> GradientVector {
    GradientVector::new(v.to_vec()).unwrap()
}

/// Neumaier-compensated sum of squares.
fn compensated_norm(v: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in v {
        let term = x * x;
        let t = sum + term;
        c += if sum.abs() >= term { (sum - t) + term } else { (term - t) + sum };
        sum = t;
    }
    (sum + c).sqrt()
}

proptest! {
    #[test]
    fn norm_matches_compensated_oracle(v in prop::collection::vec(-1e3f64..1e3, 1000)) {
        let a = norm2(&v).unwrap();
        let b = compensated_norm(&v);
        prop_assert!((a - b).abs() <= 1e-12 * b.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn layer_norms_are_pythagorean((sizes, v) in prop::collection::vec(1usize..50, 4).prop_flat_map(|s| {
        let n: usize = s.iter().sum();
        (Just(s), prop::collection::vec(-10.0f64..10.0, n))
    })) {
        let part = LayerPartition::from_sizes(&sizes).unwrap();
        let total: f64 = layer_norms(&v, &part).unwrap().iter().map(|x| x * x).sum();
        let expected = norm2(&v).unwrap().powi(2);
        prop_assert!((total - expected).abs() <= 1e-12 * expected.max(1e-300));
    }

    #[test]
    fn perturbation_has_norm_rho(g in vec_strategy(64), rho in 1e-3f64..10.0) {
        prop_assume!(nonzero(&g));
        let e = compute_perturbation(&g, rho).unwrap();
        prop_assert!((e.norm() - rho).abs() <= 1e-12 * rho);
    }

    #[test]
    fn decomposition_invariants((g, gs) in pair(100)) {
        prop_assume!(nonzero(&g));
        let b = decompose_gradient(&gv(&g), &gv(&gs)).unwrap();
        let scale = b.g_s.norm().max(1e-300);
        for ((h, v), s) in b.g_h.iter().zip(b.g_v.iter()).zip(&gs) {
            prop_assert!((h + v - s).abs() <= 1e-12 * scale);
        }
        let d: f64 = b.g_v.iter().zip(&g).map(|(a, c)| a * c).sum();
        prop_assert!(d.abs() <= 1e-9 * b.g_v.norm() * b.g.norm() + 1e-300);
        prop_assert!((-1.0..=1.0).contains(&b.cos_theta));
    }

    #[test]
    fn reuse_adds_alpha_norm((g, v) in pair(64), alpha in 0.0f64..2.0) {
        prop_assume!(nonzero(&g) && nonzero(&v));
        let r = reuse_gradient(&gv(&g), &gv(&v), alpha).unwrap();
        let diff: Vec<f64> = r.iter().zip(&g).map(|(a, b)| a - b).collect();
        let gn = norm2(&g).unwrap();
        prop_assert!((norm2(&diff).unwrap() - alpha * gn).abs() <= 1e-12 * gn.max(1.0));
    }

    #[test]
    fn clipping_never_exceeds_bound(g in vec_strategy(64), max in 1e-3f64..20.0) {
        let c = clip_global_norm(&gv(&g), max).unwrap();
        prop_assert!(c.norm() <= max * (1.0 + 1e-12));
        if norm2(&g).unwrap() <= max {
            prop_assert_eq!(c.as_slice(), g.as_slice());
        }
    }

    #[test]
    fn general_pq_reduces_to_layerwise((g, w) in pair(40), split in 0.0f64..1.0, rho in 0.01f64..5.0) {
        prop_assume!(g.len() >= 2 && nonzero(&g));
        let cut = (1 + (split * (g.len() - 2) as f64) as usize).min(g.len() - 1);
        let part = LayerPartition::from_sizes(&[cut, g.len() - cut]).unwrap();
        let lambda = trust_ratio_diagonal(&g, &w, &part).unwrap();
        let a = general_perturbation_pq(&g, &lambda, rho, 2.0, 2.0).unwrap();
        let b = compute_layerwise_perturbation(&g, &w, &part, rho).unwrap();
        for i in 0..g.len() {
            prop_assert!((a[i] - b[i]).abs() <= 1e-12 * b[i].abs().max(1.0));
        }
    }

    #[test]
    fn sampler_batches_are_distinct_and_replayable(seed in any::<u64>(), n in 2usize..200, b in 1usize..50) {
        prop_assume!(b <= n);
        let mut s1 = SamplerState::new(seed, n).unwrap();
        let mut s2 = SamplerState::new(seed, n).unwrap();
        for _ in 0..10 {
            let x = s1.next_batch(b).unwrap();
            prop_assert_eq!(&x, &s2.next_batch(b).unwrap());
            prop_assert!(Minibatch::new(x.indices().to_vec(), n).is_ok());
        }
    }

    #[test]
    fn bound_monotone_in_rho0_and_weights(n in 10u64..1_000_000, dim in 1u64..10_000, w2 in 0.1f64..1e4, rho in 0.01f64..2.0) {
        let base = pac_bound(&BoundInputs::new(n, 0.05, dim, w2, rho, 0.0).unwrap());
        let bigger_rho0 = pac_bound(&BoundInputs::new(n, 0.05, dim, w2, rho, 0.5).unwrap());
        let bigger_w = pac_bound(&BoundInputs::new(n, 0.05, dim, w2 * 2.0, rho, 0.0).unwrap());
        prop_assert!(bigger_rho0 < base);
        prop_assert!(bigger_w > base);
    }
}
