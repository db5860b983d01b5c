//! One-dimensional Gaussian kernel density estimation evaluated on a uniform grid.
//!
//! Every downstream quantity (tail masses, moments, centers of mass) is
//! computed from the gridded density with the trapezoidal rule, so two
//! estimates built from the same samples and config agree bit for bit.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`
    Silverman,
    /// `1.06 * sd * n^(-1/5)`
    Scott,
    Fixed(f64),
}

impl FromStr for BandwidthRule {
    type Err = Error;

    /// Accepts `silverman`, `scott`, `fixed:<h>` or a bare positive number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let rule = match s.to_ascii_lowercase().as_str() {
            "silverman" => BandwidthRule::Silverman,
            "scott" => BandwidthRule::Scott,
            other => {
                let h = other.strip_prefix("fixed:").unwrap_or(other);
                let h: f64 = h
                    .parse()
                    .map_err(|_| Error::Config(format!("unknown bandwidth rule '{s}'")))?;
                BandwidthRule::Fixed(h)
            }
        };
        if let BandwidthRule::Fixed(h) = rule {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!(
                    "fixed bandwidth must be > 0, got {h}"
                )));
            }
        }
        Ok(rule)
    }
}

impl std::fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandwidthRule::Silverman => f.write_str("silverman"),
            BandwidthRule::Scott => f.write_str("scott"),
            BandwidthRule::Fixed(h) => write!(f, "fixed:{h}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub bandwidth_rule: BandwidthRule,
    pub grid_size: usize,
    /// Grid padding on each side of the sample range, in bandwidths.
    pub grid_pad: f64,
    pub bandwidth_floor: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            bandwidth_rule: BandwidthRule::Silverman,
            grid_size: 512,
            grid_pad: 4.0,
            bandwidth_floor: 1e-6,
        }
    }
}

impl KdeConfig {
    pub fn with_bandwidth(mut self, rule: BandwidthRule) -> Self {
        self.bandwidth_rule = rule;
        self
    }

    pub fn fixed(h: f64) -> Self {
        Self::default().with_bandwidth(BandwidthRule::Fixed(h))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 16 {
            return Err(Error::Config(format!(
                "grid_size must be >= 16, got {}",
                self.grid_size
            )));
        }
        if !(self.grid_pad >= 0.0 && self.grid_pad.is_finite()) {
            return Err(Error::Config(format!(
                "grid_pad must be >= 0, got {}",
                self.grid_pad
            )));
        }
        if !(self.bandwidth_floor > 0.0) {
            return Err(Error::Config(format!(
                "bandwidth_floor must be > 0, got {}",
                self.bandwidth_floor
            )));
        }
        if let BandwidthRule::Fixed(h) = self.bandwidth_rule {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "fixed bandwidth must be > 0, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// A kernel density estimate sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    grid: Vec<f64>,
    density: Vec<f64>,
    bandwidth: f64,
    sample_count: usize,
}

impl DensityEstimate {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    pub fn lower(&self) -> f64 {
        self.grid[0]
    }

    pub fn upper(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.upper() - self.lower()
    }

    /// Trapezoidal integral of the density over the whole grid.
    pub fn total_mass(&self) -> f64 {
        trapezoid(&self.density, self.spacing())
    }

    /// Trapezoidal mass on `(-inf, alpha]`, interpolating linearly inside the boundary cell.
    pub fn mass_below(&self, alpha: f64) -> f64 {
        if alpha.is_nan() || alpha <= self.lower() {
            return 0.0;
        }
        if alpha >= self.upper() {
            return self.total_mass().clamp(0.0, 1.0);
        }
        let dx = self.spacing();
        let cell = (((alpha - self.lower()) / dx).floor() as usize).min(self.grid.len() - 2);
        let full = trapezoid(&self.density[..=cell], dx);
        let t = alpha - self.grid[cell];
        let slope = (self.density[cell + 1] - self.density[cell]) / dx;
        let at_alpha = self.density[cell] + slope * t;
        let partial = 0.5 * t * (self.density[cell] + at_alpha);
        (full + partial).clamp(0.0, 1.0)
    }

    /// Center of mass `sum_j p_j z_j / sum_j p_j` over the grid.
    pub fn mean(&self) -> Result<f64> {
        let (weighted, total) = self
            .grid
            .iter()
            .zip(&self.density)
            .fold((0.0, 0.0), |(w, t), (&z, &p)| (w + p * z, t + p));
        if !(total > 0.0) {
            return Err(Error::Degenerate(
                "density is zero everywhere on the grid".into(),
            ));
        }
        Ok(weighted / total)
    }

    /// Trapezoidal zeroth and first moments `(M0, M1)`.
    pub fn moments(&self) -> (f64, f64) {
        let dx = self.spacing();
        let first: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(z, p)| z * p)
            .collect();
        (trapezoid(&self.density, dx), trapezoid(&first, dx))
    }

    /// Two-column `z,p` CSV suitable for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,p\n");
        for (z, p) in self.grid.iter().zip(&self.density) {
            let _ = writeln!(out, "{z},{p}");
        }
        out
    }
}

/// Composite trapezoidal rule on a uniform grid.
pub(crate) fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dx * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

fn sample_sd(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|z| (z - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Linear-interpolated quantile (type 7) of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interquartile_range(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}

pub fn select_bandwidth(samples: &[f64], rule: BandwidthRule, floor: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "bandwidth of an empty sample".into(),
        ));
    }
    let n_factor = (samples.len() as f64).powf(-0.2);
    let h = match rule {
        BandwidthRule::Fixed(h) => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "fixed bandwidth must be > 0, got {h}"
                )));
            }
            return Ok(h);
        }
        BandwidthRule::Scott => 1.06 * sample_sd(samples) * n_factor,
        BandwidthRule::Silverman => {
            let sd = sample_sd(samples);
            let iqr = interquartile_range(samples) / 1.34;
            // a zero IQR would collapse the bandwidth even when the sample has spread
            let spread = match (sd > 0.0, iqr > 0.0) {
                (true, true) => sd.min(iqr),
                (true, false) => sd,
                (false, true) => iqr,
                (false, false) => 0.0,
            };
            0.9 * spread * n_factor
        }
    };
    Ok(h.max(floor))
}

pub fn estimate_density(samples: &[f64], config: &KdeConfig) -> Result<DensityEstimate> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("density of an empty sample".into()));
    }
    if let Some(bad) = samples.iter().find(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite sample {bad}")));
    }
    let h = select_bandwidth(samples, config.bandwidth_rule, config.bandwidth_floor)?;
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
            (lo.min(z), hi.max(z))
        });
    let lower = min - config.grid_pad * h;
    let upper = max + config.grid_pad * h;
    let steps = (config.grid_size - 1) as f64;
    let grid: Vec<f64> = (0..config.grid_size)
        .map(|j| lower + (upper - lower) * (j as f64 / steps))
        .collect();

    let norm = FRAC_1_SQRT_2PI / (samples.len() as f64 * h);
    let density = grid
        .iter()
        .map(|&z| {
            let sum: f64 = samples
                .iter()
                .map(|&zi| {
                    let u = (z - zi) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            norm * sum
        })
        .collect();

    Ok(DensityEstimate {
        grid,
        density,
        bandwidth: h,
        sample_count: samples.len(),
    })
}
