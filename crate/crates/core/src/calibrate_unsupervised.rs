//! Unsupervised calibration by moment balancing.
//!
//! The offset is chosen so that the first moment of the pooled logit density
//! about it vanishes, `Phi(alpha) = integral (z - alpha) p(z) dz = 0`. `Phi` is
//! linear in `alpha`, so the root is the density's center of mass and can be
//! written in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kde::{estimate_density, DensityEstimate, KdeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnsupervisedMethod {
    ClosedForm,
    RootFind,
    ConfidenceWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnsupervisedResult {
    pub alpha: f64,
    /// `|Phi(alpha)|` at the returned offset.
    pub residual: f64,
    pub method: UnsupervisedMethod,
}

/// Trapezoidal `M1 - alpha * M0`.
pub fn moment_imbalance(d: &DensityEstimate, alpha: f64) -> f64 {
    let (m0, m1) = d.moments();
    m1 - alpha * m0
}

pub fn solve_alpha_closed_form(d: &DensityEstimate) -> Result<UnsupervisedResult> {
    let alpha = d.mean()?;
    let residual = moment_imbalance(d, alpha).abs();
    let limit = 1e-6 * d.span();
    if residual >= limit.max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(format!(
            "moment residual {residual:e} exceeds {limit:e}; grid too coarse or too narrow"
        )));
    }
    Ok(UnsupervisedResult {
        alpha,
        residual,
        method: UnsupervisedMethod::ClosedForm,
    })
}

/// Bisection on `Phi` over the grid span.
pub fn solve_alpha_root_find(d: &DensityEstimate) -> Result<UnsupervisedResult> {
    let (m0, m1) = d.moments();
    if !(m0 > 0.0) {
        return Err(Error::Degenerate("density has zero mass".into()));
    }
    let phi = |a: f64| m1 - a * m0;
    let (mut lo, mut hi) = (d.lower(), d.upper());
    let tol = 1e-12 * d.span().max(f64::MIN_POSITIVE);
    // Phi decreases in alpha: positive below the root, negative above it.
    if phi(lo) < 0.0 {
        hi = lo;
    } else if phi(hi) > 0.0 {
        lo = hi;
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    Ok(UnsupervisedResult {
        alpha,
        residual: phi(alpha).abs(),
        method: UnsupervisedMethod::RootFind,
    })
}

/// Center of mass of `p(z) * |z - m|^gamma`, where `m` is the unweighted
/// center of mass. Larger `gamma` emphasizes confident logits far from the
/// bulk; `gamma = 0` reproduces [`solve_alpha_closed_form`].
pub fn confidence_weighted_alpha(d: &DensityEstimate, gamma: f64) -> Result<UnsupervisedResult> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    if gamma == 0.0 {
        return solve_alpha_closed_form(d);
    }
    let center = d.mean()?;
    let (weighted, total) =
        d.grid()
            .iter()
            .zip(d.density())
            .fold((0.0, 0.0), |(wz, wt), (&z, &p)| {
                let w = p * (z - center).abs().powf(gamma);
                (wz + w * z, wt + w)
            });
    if !(total > 0.0) {
        return Err(Error::Degenerate("weighted density has zero mass".into()));
    }
    let alpha = weighted / total;
    let residual = d
        .grid()
        .iter()
        .zip(d.density())
        .map(|(&z, &p)| p * (z - center).abs().powf(gamma) * (z - alpha))
        .sum::<f64>()
        .abs()
        * d.spacing();
    Ok(UnsupervisedResult {
        alpha,
        residual,
        method: UnsupervisedMethod::ConfidenceWeighted,
    })
}

pub fn calibrate(logits: &[f64], config: &KdeConfig) -> Result<UnsupervisedResult> {
    let d = estimate_density(logits, config)?;
    solve_alpha_closed_form(&d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dens(samples: &[f64], h: f64) -> DensityEstimate {
        estimate_density(samples, &KdeConfig::fixed(h)).unwrap()
    }

    #[test]
    fn imbalance_vanishes_at_the_mean() {
        let d = dens(&[-1.0, 0.5, 3.0, 3.5], 0.4);
        let mean = d.mean().unwrap();
        assert!(moment_imbalance(&d, mean).abs() < 1e-6 * d.span());
        let (m0, _) = d.moments();
        assert!((moment_imbalance(&d, mean - 1.0) - m0).abs() < 1e-6);
        assert!((m0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn symmetric_pair_balances_at_zero() {
        let d = dens(&[-3.0, 3.0], 0.5);
        assert!(moment_imbalance(&d, 0.0).abs() < 1e-9);
        let r = solve_alpha_closed_form(&d).unwrap();
        assert!(r.alpha.abs() < 1e-6);
    }

    #[test]
    fn point_mass() {
        let d = estimate_density(&[4.2; 30], &KdeConfig::default()).unwrap();
        let r = solve_alpha_closed_form(&d).unwrap();
        assert!((r.alpha - 4.2).abs() < 1e-6);
    }

    #[test]
    fn weighted_mean_of_clusters() {
        let mut samples = vec![-2.0; 900];
        samples.extend(vec![4.0; 100]);
        let d = dens(&samples, 0.2);
        let r = solve_alpha_closed_form(&d).unwrap();
        assert!((r.alpha + 1.4).abs() < 0.02, "{}", r.alpha);
        let rf = solve_alpha_root_find(&d).unwrap();
        assert!((rf.alpha - r.alpha).abs() < 1e-6 * d.span());
        assert_eq!(rf.method, UnsupervisedMethod::RootFind);
    }

    #[test]
    fn gamma_zero_matches_closed_form_exactly() {
        let d = dens(&[-1.0, 0.0, 2.5, 7.0], 0.3);
        let a = confidence_weighted_alpha(&d, 0.0).unwrap();
        let b = solve_alpha_closed_form(&d).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert!(confidence_weighted_alpha(&d, -1.0).is_err());
    }

    #[test]
    fn gamma_keeps_symmetric_center() {
        let d = dens(&[-4.0, -1.0, 1.0, 4.0], 0.3);
        for gamma in [0.5, 1.0, 2.0, 3.0] {
            let r = confidence_weighted_alpha(&d, gamma).unwrap();
            assert!(r.alpha.abs() < 1e-6, "gamma {gamma}: {}", r.alpha);
        }
    }
}
