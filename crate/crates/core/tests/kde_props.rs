use logitcal::kde::{estimate_density, select_bandwidth, BandwidthRule};
use logitcal::KdeConfig;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn samples() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-20.0f64..20.0, 1..60)
}

proptest! {
    #[test]
    fn mass_is_normalized(xs in samples()) {
        let d = estimate_density(&xs, &KdeConfig::default()).unwrap();
        prop_assert!((d.total_mass() - 1.0).abs() <= 1e-3, "mass {}", d.total_mass());
        prop_assert!(d.density().iter().all(|&p| p >= 0.0));
        prop_assert!(d.grid().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn mass_below_is_monotone(xs in samples(), a in -30.0f64..30.0, b in -30.0f64..30.0) {
        let d = estimate_density(&xs, &KdeConfig::default()).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.mass_below(lo) <= d.mass_below(hi));
    }

    #[test]
    fn shift_equivariance(xs in samples(), c in -50.0f64..50.0, a in -25.0f64..25.0, h in 0.05f64..2.0) {
        let cfg = KdeConfig::fixed(h);
        let d = estimate_density(&xs, &cfg).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|z| z + c).collect();
        let ds = estimate_density(&shifted, &cfg).unwrap();
        prop_assert!((ds.mean().unwrap() - d.mean().unwrap() - c).abs() < 1e-6);
        prop_assert!((ds.mass_below(a + c) - d.mass_below(a)).abs() < 1e-6);
    }

    #[test]
    fn grid_refinement(xs in proptest::collection::vec(-5.0f64..5.0, 1..30), a in -8.0f64..8.0, h in 0.05f64..1.0) {
        let coarse = KdeConfig { grid_size: 512, ..KdeConfig::fixed(h) };
        let fine = KdeConfig { grid_size: 1024, ..coarse };
        let dc = estimate_density(&xs, &coarse).unwrap();
        let df = estimate_density(&xs, &fine).unwrap();
        prop_assert!((dc.mass_below(a) - df.mass_below(a)).abs() < 1e-3);
    }

    #[test]
    fn center_of_mass_tracks_sample_mean(xs in samples()) {
        let d = estimate_density(&xs, &KdeConfig::default()).unwrap();
        let sample_mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let tol = d.spacing().max(1e-3);
        prop_assert!((d.mean().unwrap() - sample_mean).abs() < tol);
    }
}

#[test]
fn silverman_on_standard_normal() {
    let mut rng = StdRng::seed_from_u64(7);
    let xs: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let h = select_bandwidth(&xs, BandwidthRule::Silverman, 1e-6).unwrap();
    let nominal = 0.9 * 1000f64.powf(-0.2);
    assert!(
        (h / nominal - 1.0).abs() < 0.2,
        "h = {h}, nominal {nominal}"
    );

    // closed-form rule recomputed from the realized spread
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1.0);
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let expected = 0.9 * sd.min(iqr / 1.34) * n.powf(-0.2);
    assert!((h - expected).abs() < 1e-12);

    let scott = select_bandwidth(&xs, BandwidthRule::Scott, 1e-6).unwrap();
    assert!((scott - 1.06 * sd * n.powf(-0.2)).abs() < 1e-12);
}

#[test]
fn symmetric_density_splits_in_half() {
    let d = estimate_density(&[-3.0, 3.0], &KdeConfig::fixed(0.5)).unwrap();
    assert!((d.mass_below(0.0) - 0.5).abs() < 1e-3);
    let d = estimate_density(&[-1.0, -0.2, 0.2, 1.0], &KdeConfig::default()).unwrap();
    assert!((d.mass_below(0.0) - 0.5 * d.total_mass()).abs() < 1e-9);
}
