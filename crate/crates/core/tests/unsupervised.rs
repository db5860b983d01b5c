mod common;

use common::normal_samples;
use logitcal::calibrate_unsupervised::{
    confidence_weighted_alpha, moment_imbalance, solve_alpha_closed_form, solve_alpha_root_find,
};
use logitcal::kde::estimate_density;
use logitcal::KdeConfig;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

proptest! {
    #[test]
    fn imbalance_is_linear(xs in proptest::collection::vec(-10.0f64..10.0, 1..50), a in -20.0f64..20.0, b in -20.0f64..20.0, c in -20.0f64..20.0) {
        prop_assume!((a - b).abs() > 1e-3 && (a - c).abs() > 1e-3);
        let d = estimate_density(&xs, &KdeConfig::default()).unwrap();
        let (fa, fb, fc) = (moment_imbalance(&d, a), moment_imbalance(&d, b), moment_imbalance(&d, c));
        let s1 = (fb - fa) / (b - a);
        let s2 = (fc - fa) / (c - a);
        prop_assert!((s1 - s2).abs() <= 1e-12 * s1.abs().max(1.0), "{s1} vs {s2}");
        let (m0, m1) = d.moments();
        prop_assert!((fa - (m1 - a * m0)).abs() <= 1e-12 * m1.abs().max(a.abs()).max(1.0));
    }

    #[test]
    fn closed_form_agrees_with_root_finder(xs in proptest::collection::vec(-10.0f64..10.0, 1..80)) {
        let d = estimate_density(&xs, &KdeConfig::default()).unwrap();
        let closed = solve_alpha_closed_form(&d).unwrap();
        let root = solve_alpha_root_find(&d).unwrap();
        prop_assert!((closed.alpha - root.alpha).abs() < 1e-6 * d.span());
    }

    #[test]
    fn shift_equivariance(xs in proptest::collection::vec(-5.0f64..5.0, 1..40), c in -30.0f64..30.0) {
        let cfg = KdeConfig::fixed(0.3);
        let d = estimate_density(&xs, &cfg).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|z| z + c).collect();
        let ds = estimate_density(&shifted, &cfg).unwrap();
        let a = solve_alpha_closed_form(&d).unwrap().alpha;
        let b = solve_alpha_closed_form(&ds).unwrap().alpha;
        prop_assert!((b - a - c).abs() < 1e-6);
    }
}

#[test]
fn standard_normal_centers_at_zero() {
    let xs = normal_samples(0.0, 1.0, 1000, 11);
    let d = estimate_density(&xs, &KdeConfig::default()).unwrap();
    let r = solve_alpha_root_find(&d).unwrap();
    assert!(r.alpha.abs() < 0.1, "{r:?}");
}

#[test]
fn uniform_centers_at_five() {
    let mut rng = StdRng::seed_from_u64(12);
    let xs: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..10.0)).collect();
    let d = estimate_density(&xs, &KdeConfig::default()).unwrap();
    let r = solve_alpha_root_find(&d).unwrap();
    assert!((r.alpha - 5.0).abs() < 0.2, "{r:?}");
}

#[test]
fn bimodal_recovery() {
    for (k, sep) in [4.0, 6.0, 8.0].into_iter().enumerate() {
        for seed in 0..5u64 {
            let mid = 1.25 - k as f64;
            let mut xs = normal_samples(mid - sep / 2.0, 1.0, 250, 100 * seed + 1);
            xs.extend(normal_samples(mid + sep / 2.0, 1.0, 250, 100 * seed + 2));
            let d = estimate_density(&xs, &KdeConfig::default()).unwrap();
            let a = solve_alpha_closed_form(&d).unwrap().alpha;
            assert!(
                (a - mid).abs() <= 0.05 * sep,
                "sep {sep} seed {seed}: {a} vs {mid}"
            );
        }
    }
}

#[test]
fn residual_invariant_holds() {
    let mut xs = vec![-2.0; 900];
    xs.extend(vec![4.0; 100]);
    let d = estimate_density(&xs, &KdeConfig::fixed(0.2)).unwrap();
    let r = solve_alpha_closed_form(&d).unwrap();
    assert!(r.residual < 1e-6 * d.span());
    assert!((r.alpha + 1.4).abs() < 0.02);
}

/// Reweighted center of mass of the exact two-Gaussian mixture, by midpoint rule.
fn weighted_mixture_mean(h: f64, center: f64, gamma: f64) -> f64 {
    let pdf = |z: f64, m: f64| (-0.5 * ((z - m) / h).powi(2)).exp();
    let (lo, hi, n) = (-6.0, 8.0, 400_000);
    let dz = (hi - lo) / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let z = lo + (i as f64 + 0.5) * dz;
        let p = 0.9 * pdf(z, -2.0) + 0.1 * pdf(z, 4.0);
        let w = p * (z - center).abs().powf(gamma);
        num += w * z;
        den += w;
    }
    num / den
}

#[test]
fn confidence_weighting_moves_toward_minority_cluster() {
    let mut xs = vec![-2.0; 900];
    xs.extend(vec![4.0; 100]);
    let d = estimate_density(&xs, &KdeConfig::fixed(0.2)).unwrap();
    let plain = solve_alpha_closed_form(&d).unwrap().alpha;
    let weighted = confidence_weighted_alpha(&d, 2.0).unwrap();
    assert!(
        weighted.alpha > plain + 0.5,
        "{} vs {plain}",
        weighted.alpha
    );
    let oracle = weighted_mixture_mean(0.2, plain, 2.0);
    assert!(
        (weighted.alpha - oracle).abs() < 0.02,
        "{} vs oracle {oracle}",
        weighted.alpha
    );
    assert_eq!(confidence_weighted_alpha(&d, 0.0).unwrap().alpha, plain);
}
