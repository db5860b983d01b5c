//! Synthetic logit worlds with a known Bayes-optimal threshold.
//!
//! Real logits follow `N(mu_real, sigma_real)` in both domains. Fake logits
//! follow `N(mu_fake_train, sigma_fake)` at training time and drift toward the
//! real class by a constant `c` at test time. Fake priors may differ between
//! the domains. Because the class-conditional densities are Gaussian in logit
//! space, the optimal test threshold has a closed form and serves as the
//! reference every calibrator is checked against.

use std::fmt::Write as _;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::accuracy;
use crate::error::{Error, Result};
use crate::kvfile;
use crate::logit_data::{split_by_label, Label, LogitDataset, LogitRecord};

pub const SPEC_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub mu_real: f64,
    pub sigma_real: f64,
    pub mu_fake_train: f64,
    pub sigma_fake: f64,
    /// Test-time fake logits have mean `mu_fake_train - conditional_shift`.
    pub conditional_shift: f64,
    pub pi_train_fake: f64,
    pub pi_test_fake: f64,
    pub seed: u64,
}

/// Named scenarios shipped with the simulator.
pub const SCENARIOS: [&str; 3] = ["no-shift", "conditional-shift", "joint-shift"];

impl ShiftSpec {
    pub fn scenario(name: &str) -> Option<Self> {
        let base = ShiftSpec {
            mu_real: -2.0,
            sigma_real: 1.0,
            mu_fake_train: 2.0,
            sigma_fake: 1.0,
            conditional_shift: 0.0,
            pi_train_fake: 0.5,
            pi_test_fake: 0.5,
            seed: 0,
        };
        match name {
            "no-shift" => Some(base),
            "conditional-shift" => Some(ShiftSpec {
                mu_fake_train: 3.0,
                conditional_shift: 2.0,
                ..base
            }),
            "joint-shift" => Some(ShiftSpec {
                conditional_shift: 2.0,
                pi_train_fake: 0.3,
                ..base
            }),
            _ => None,
        }
    }

    pub fn mu_fake_test(&self) -> f64 {
        self.mu_fake_train - self.conditional_shift
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu_real,
            self.sigma_real,
            self.mu_fake_train,
            self.sigma_fake,
            self.conditional_shift,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "shift spec has non-finite parameters".into(),
            ));
        }
        if !(self.sigma_real > 0.0 && self.sigma_fake > 0.0) {
            return Err(Error::InvalidArgument(
                "standard deviations must be > 0".into(),
            ));
        }
        for (name, pi) in [
            ("pi_train_fake", self.pi_train_fake),
            ("pi_test_fake", self.pi_test_fake),
        ] {
            if !(pi > 0.0 && pi < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {pi}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let kv = kvfile::parse(text)?;
        if let Some(version) = kvfile::get_parsed::<u32>(&kv, "version")? {
            if version != SPEC_FORMAT_VERSION {
                return Err(Error::Config(format!("unsupported spec version {version}")));
            }
        }
        let base = match kv.get("scenario") {
            Some(name) => ShiftSpec::scenario(name)
                .ok_or_else(|| Error::Config(format!("unknown scenario '{name}'")))?,
            None => ShiftSpec {
                mu_real: kvfile::require(&kv, "mu_real")?,
                sigma_real: kvfile::require(&kv, "sigma_real")?,
                mu_fake_train: kvfile::require(&kv, "mu_fake_train")?,
                sigma_fake: kvfile::require(&kv, "sigma_fake")?,
                conditional_shift: kvfile::require(&kv, "conditional_shift")?,
                pi_train_fake: kvfile::require(&kv, "pi_train_fake")?,
                pi_test_fake: kvfile::require(&kv, "pi_test_fake")?,
                seed: kvfile::get_parsed(&kv, "seed")?.unwrap_or(0),
            },
        };
        // explicit keys override a named scenario
        let spec = ShiftSpec {
            mu_real: kvfile::get_parsed(&kv, "mu_real")?.unwrap_or(base.mu_real),
            sigma_real: kvfile::get_parsed(&kv, "sigma_real")?.unwrap_or(base.sigma_real),
            mu_fake_train: kvfile::get_parsed(&kv, "mu_fake_train")?.unwrap_or(base.mu_fake_train),
            sigma_fake: kvfile::get_parsed(&kv, "sigma_fake")?.unwrap_or(base.sigma_fake),
            conditional_shift: kvfile::get_parsed(&kv, "conditional_shift")?
                .unwrap_or(base.conditional_shift),
            pi_train_fake: kvfile::get_parsed(&kv, "pi_train_fake")?.unwrap_or(base.pi_train_fake),
            pi_test_fake: kvfile::get_parsed(&kv, "pi_test_fake")?.unwrap_or(base.pi_test_fake),
            seed: kvfile::get_parsed(&kv, "seed")?.unwrap_or(base.seed),
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version = {SPEC_FORMAT_VERSION}");
        let _ = writeln!(out, "mu_real = {}", self.mu_real);
        let _ = writeln!(out, "sigma_real = {}", self.sigma_real);
        let _ = writeln!(out, "mu_fake_train = {}", self.mu_fake_train);
        let _ = writeln!(out, "sigma_fake = {}", self.sigma_fake);
        let _ = writeln!(out, "conditional_shift = {}", self.conditional_shift);
        let _ = writeln!(out, "pi_train_fake = {}", self.pi_train_fake);
        let _ = writeln!(out, "pi_test_fake = {}", self.pi_test_fake);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedShiftQuantities {
    /// `log(pi_test / pi_train)` for the fake class.
    pub delta: f64,
    /// Difference of the fake-class prior log-odds between test and train.
    pub delta_prime: f64,
    pub bayes_threshold_test: f64,
    /// Offset that makes `z - alpha > 0` Bayes-optimal on the test domain.
    pub alpha_tilde: f64,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn derive_quantities(spec: &ShiftSpec) -> Result<DerivedShiftQuantities> {
    spec.validate()?;
    let delta = (spec.pi_test_fake / spec.pi_train_fake).ln();
    let delta_prime = (spec.pi_test_fake * (1.0 - spec.pi_train_fake)
        / (spec.pi_train_fake * (1.0 - spec.pi_test_fake)))
        .ln();
    let threshold = bayes_threshold(
        spec.mu_real,
        spec.sigma_real,
        spec.mu_fake_test(),
        spec.sigma_fake,
        spec.pi_test_fake,
    )?;
    Ok(DerivedShiftQuantities {
        delta,
        delta_prime,
        bayes_threshold_test: threshold,
        alpha_tilde: threshold,
    })
}

/// Point where `(1 - pi) N(z; mu0, s0) = pi N(z; mu1, s1)`, taking the root
/// between the two means when the variances differ.
pub fn bayes_threshold(mu0: f64, s0: f64, mu1: f64, s1: f64, pi_fake: f64) -> Result<f64> {
    let prior_log_odds = -logit(pi_fake);
    if s0 == s1 {
        if mu0 == mu1 {
            return Err(Error::Degenerate(
                "real and fake test components coincide; no threshold exists".into(),
            ));
        }
        return Ok(0.5 * (mu0 + mu1) + s0 * s0 * prior_log_odds / (mu1 - mu0));
    }
    // a z^2 + b z + c = 0 from equating the two prior-weighted log densities
    let a = 0.5 / (s0 * s0) - 0.5 / (s1 * s1);
    let b = mu1 / (s1 * s1) - mu0 / (s0 * s0);
    let c =
        0.5 * mu0 * mu0 / (s0 * s0) - 0.5 * mu1 * mu1 / (s1 * s1) + (s0 / s1).ln() - prior_log_odds;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::Degenerate(
            "prior-weighted densities never cross".into(),
        ));
    }
    let sqrt_disc = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (b + sqrt_disc.copysign(b));
    let roots = [q / a, if q != 0.0 { c / q } else { f64::NAN }];
    let (lo, hi) = (mu0.min(mu1), mu0.max(mu1));
    roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= lo && *r <= hi)
        .min_by(|x, y| {
            (x - 0.5 * (lo + hi))
                .abs()
                .total_cmp(&(y - 0.5 * (lo + hi)).abs())
        })
        .ok_or_else(|| Error::Degenerate("no decision boundary between the class means".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub train: LogitDataset,
    pub test: LogitDataset,
    pub spec: ShiftSpec,
    pub derived: DerivedShiftQuantities,
}

pub fn sample_world(spec: &ShiftSpec, n_train: usize, n_test: usize) -> Result<SyntheticWorld> {
    if n_train < 2 || n_test < 2 {
        return Err(Error::InvalidArgument(format!(
            "sample counts must be >= 2, got train={n_train}, test={n_test}"
        )));
    }
    let derived = derive_quantities(spec)?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let real = Normal::new(spec.mu_real, spec.sigma_real).expect("validated sigma");
    let fake_train = Normal::new(spec.mu_fake_train, spec.sigma_fake).expect("validated sigma");
    let fake_test = Normal::new(spec.mu_fake_test(), spec.sigma_fake).expect("validated sigma");

    let mut draw = |n: usize, pi: f64, fake: &Normal<f64>, tag: &str| {
        (0..n)
            .map(|i| {
                let (label, z) = if rng.gen_bool(pi) {
                    (Label::Fake, fake.sample(&mut rng))
                } else {
                    (Label::Real, real.sample(&mut rng))
                };
                LogitRecord::new(z, Some(label), tag).with_id(format!("{tag}-{i}"))
            })
            .collect::<Vec<_>>()
    };
    let train = draw(n_train, spec.pi_train_fake, &fake_train, "train");
    let test = draw(n_test, spec.pi_test_fake, &fake_test, "test");
    let provenance = format!("shift-sim:{}", spec.to_kv_string().replace('\n', ";"));
    Ok(SyntheticWorld {
        train: LogitDataset::new(train, format!("{provenance}train"))?,
        test: LogitDataset::new(test, format!("{provenance}test"))?,
        spec: *spec,
        derived,
    })
}

/// Test accuracy at the default threshold and at the analytic Bayes threshold.
pub fn default_threshold_accuracy(world: &SyntheticWorld) -> Result<(f64, f64)> {
    let split = split_by_label(&world.test)?;
    Ok((
        accuracy(&split, 0.0)?,
        accuracy(&split, world.derived.bayes_threshold_test)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric(c: f64, pi_test: f64) -> ShiftSpec {
        ShiftSpec {
            conditional_shift: c,
            pi_test_fake: pi_test,
            ..ShiftSpec::scenario("no-shift").unwrap()
        }
    }

    #[test]
    fn symmetric_threshold_is_zero() {
        let d = derive_quantities(&symmetric(0.0, 0.5)).unwrap();
        assert_eq!(d.bayes_threshold_test, 0.0);
        assert_eq!(d.delta, 0.0);
        assert_eq!(d.delta_prime, 0.0);
    }

    #[test]
    fn conditional_shift_moves_threshold_to_midpoint() {
        let d = derive_quantities(&symmetric(2.0, 0.5)).unwrap();
        assert!((d.bayes_threshold_test + 1.0).abs() < 1e-12);
    }

    #[test]
    fn prior_shift_term() {
        // pi_test chosen so that its log-odds are exactly 1
        let pi = 1.0 / (1.0 + (-1.0f64).exp());
        let d = derive_quantities(&symmetric(2.0, pi)).unwrap();
        assert!((d.delta_prime - 1.0).abs() < 1e-12);
        assert!((d.bayes_threshold_test + 1.5).abs() < 1e-9);
    }

    #[test]
    fn coincident_classes_are_degenerate() {
        let spec = symmetric(4.0, 0.5);
        assert!(matches!(
            derive_quantities(&spec),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn unequal_variance_root_equalizes_weighted_densities() {
        let spec = ShiftSpec {
            sigma_fake: 2.0,
            pi_test_fake: 0.3,
            ..symmetric(1.0, 0.5)
        };
        let t = derive_quantities(&spec).unwrap().bayes_threshold_test;
        let pdf = |z: f64, m: f64, s: f64| (-0.5 * ((z - m) / s).powi(2)).exp() / s;
        let lhs = 0.7 * pdf(t, -2.0, 1.0);
        let rhs = 0.3 * pdf(t, 1.0, 2.0);
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        assert!(t > -2.0 && t < 1.0);
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = symmetric(0.0, 0.5);
        spec.pi_test_fake = 1.0;
        assert!(spec.validate().is_err());
        spec.pi_test_fake = 0.5;
        spec.sigma_real = 0.0;
        assert!(spec.validate().is_err());
        assert!(sample_world(&symmetric(0.0, 0.5), 1, 10).is_err());
    }

    #[test]
    fn kv_round_trip_and_scenario_override() {
        let spec = ShiftSpec::scenario("joint-shift").unwrap();
        assert_eq!(ShiftSpec::from_kv_str(&spec.to_kv_string()).unwrap(), spec);
        let s = ShiftSpec::from_kv_str("scenario = conditional-shift\nseed = 9\n").unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.conditional_shift, 2.0);
        assert!(ShiftSpec::from_kv_str("version = 7\nscenario = no-shift\n").is_err());
        assert!(ShiftSpec::from_kv_str("mu_real = 1\n").is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = ShiftSpec::scenario("conditional-shift").unwrap();
        let a = sample_world(&spec, 50, 80).unwrap();
        let b = sample_world(&spec, 50, 80).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test.len(), 80);
        assert!(a.test.records().iter().all(|r| r.source == "test"));
    }

    #[test]
    fn catalog_names_resolve() {
        for name in SCENARIOS {
            let spec = ShiftSpec::scenario(name).unwrap();
            derive_quantities(&spec).unwrap();
        }
        assert!(ShiftSpec::scenario("nope").is_none());
    }
}
