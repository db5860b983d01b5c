//! Supervised calibration: pick the offset that minimizes the KDE estimate of
//! the balanced classification error on a labeled validation set.
//!
//! With class densities `p0` (real) and `p1` (fake) and the decision rule
//! `z - alpha > 0 => fake`, the error is
//!
//! ```text
//! R(alpha) = P(z <= alpha | fake) + P(z > alpha | real)
//!          = mass_below(p1, alpha) + (mass(p0) - mass_below(p0, alpha))
//! ```
//!
//! The second term is the upper tail of `p0`; `R` ranges over `[0, 2]`.

use serde::Serialize;

use crate::brent::minimize_bounded;
use crate::error::{Error, Result};
use crate::kde::{estimate_density, DensityEstimate, KdeConfig};
use crate::logit_data::ClassSplit;

const MAX_BRENT_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupervisedResult {
    pub alpha: f64,
    pub risk: f64,
    pub iterations: usize,
    pub bounds: (f64, f64),
}

pub fn risk(p0: &DensityEstimate, p1: &DensityEstimate, alpha: f64) -> f64 {
    p1.mass_below(alpha) + (p0.total_mass() - p0.mass_below(alpha))
}

/// Union of both density grids.
pub fn search_bounds(p0: &DensityEstimate, p1: &DensityEstimate) -> (f64, f64) {
    (p0.lower().min(p1.lower()), p0.upper().max(p1.upper()))
}

/// Per-class densities, each with its own bandwidth.
pub fn class_densities(
    split: &ClassSplit,
    config: &KdeConfig,
) -> Result<(DensityEstimate, DensityEstimate)> {
    split.require_both()?;
    Ok((
        estimate_density(&split.reals, config)?,
        estimate_density(&split.fakes, config)?,
    ))
}

/// Bounded Brent minimization of [`risk`] over the union of the two grids.
///
/// On a flat plateau the returned offset is wherever the search settles; only
/// the risk value is meaningful there.
pub fn optimize_alpha(p0: &DensityEstimate, p1: &DensityEstimate) -> SupervisedResult {
    let (lo, hi) = search_bounds(p0, p1);
    let xtol = 1e-6 * (hi - lo) + 1e-9;
    let found = minimize_bounded(|a| risk(p0, p1, a), lo, hi, xtol, MAX_BRENT_ITERATIONS);

    // Brent never probes the endpoints; keep the invariant R(alpha) <= R(lo), R(hi).
    let (mut alpha, mut best) = (found.x, found.fx);
    for edge in [lo, hi] {
        let r = risk(p0, p1, edge);
        if r < best {
            alpha = edge;
            best = r;
        }
    }
    SupervisedResult {
        alpha,
        risk: best,
        iterations: found.iterations,
        bounds: (lo, hi),
    }
}

/// Exhaustive evaluation of [`risk`] on `resolution` equally spaced offsets.
///
/// Offsets whose risk is within `1e-12` of the minimum count as tied; the
/// result is the center of the first contiguous run of tied offsets.
pub fn grid_search_alpha(
    p0: &DensityEstimate,
    p1: &DensityEstimate,
    resolution: usize,
) -> Result<SupervisedResult> {
    if resolution < 100 {
        return Err(Error::InvalidArgument(format!(
            "grid search resolution must be >= 100, got {resolution}"
        )));
    }
    let (lo, hi) = search_bounds(p0, p1);
    let step = (hi - lo) / (resolution - 1) as f64;
    let alphas: Vec<f64> = (0..resolution).map(|k| lo + step * k as f64).collect();
    let risks: Vec<f64> = alphas.iter().map(|&a| risk(p0, p1, a)).collect();
    let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let tied = |r: f64| r <= min + 1e-12;
    let first = risks.iter().position(|&r| tied(r)).expect("non-empty grid");
    let last = first + risks[first..].iter().take_while(|&&r| tied(r)).count() - 1;
    let alpha = 0.5 * (alphas[first] + alphas[last]);
    Ok(SupervisedResult {
        alpha,
        risk: risk(p0, p1, alpha),
        iterations: resolution,
        bounds: (lo, hi),
    })
}

/// Estimate both class densities and minimize the risk.
pub fn calibrate(split: &ClassSplit, config: &KdeConfig) -> Result<SupervisedResult> {
    let (p0, p1) = class_densities(split, config)?;
    Ok(optimize_alpha(&p0, &p1))
}
