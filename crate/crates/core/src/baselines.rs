//! Supervised comparison methods for choosing the offset: an interval-halving
//! search on validation accuracy and gradient descent on the binary
//! cross-entropy of the shifted logits. Also hosts the accuracy metric and the
//! exhaustive threshold sweep that bounds every method from above.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logit_data::{median_by_class, ClassSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    BinarySearch,
    OffsetTraining,
    ExhaustiveSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineResult {
    pub alpha: f64,
    pub accuracy_on_validation: f64,
    pub iterations: usize,
    pub method: BaselineMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitRule {
    /// Midpoint of the two class medians.
    ClassMidpoint,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetTrainingConfig {
    pub steps: usize,
    /// Step size at the first iteration; decays linearly to zero.
    pub initial_step_size: f64,
    pub init_rule: InitRule,
}

impl Default for OffsetTrainingConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            initial_step_size: 0.05,
            init_rule: InitRule::ClassMidpoint,
        }
    }
}

/// Fraction of labeled logits classified correctly by `z - alpha > 0 => fake`.
/// A logit exactly at the threshold is predicted real.
pub fn accuracy(split: &ClassSplit, alpha: f64) -> Result<f64> {
    let n = split.labeled_len();
    if n == 0 {
        return Err(Error::NoLabels);
    }
    let correct = split.reals.iter().filter(|&&z| z - alpha <= 0.0).count()
        + split.fakes.iter().filter(|&&z| z - alpha > 0.0).count();
    Ok(correct as f64 / n as f64)
}

/// Interval halving toward the endpoint with higher accuracy, starting from
/// the labeled logit range. `tolerance` defaults to `1e-4` of that range.
pub fn binary_search_threshold(
    split: &ClassSplit,
    tolerance: Option<f64>,
) -> Result<BaselineResult> {
    split.require_both()?;
    let (mut left, mut right) = split.logit_range().ok_or(Error::NoLabels)?;
    if let Some(t) = tolerance {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {t}"
            )));
        }
    }
    let tolerance = tolerance.unwrap_or(1e-4 * (right - left));
    if !tolerance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let mut iterations = 0;
    while right - left >= tolerance && right > left {
        let mid = 0.5 * (left + right);
        if mid <= left || mid >= right {
            break;
        }
        if accuracy(split, left)? > accuracy(split, right)? {
            right = mid;
        } else {
            left = mid;
        }
        iterations += 1;
    }
    let alpha = 0.5 * (left + right);
    Ok(BaselineResult {
        alpha,
        accuracy_on_validation: accuracy(split, alpha)?,
        iterations,
        method: BaselineMethod::BinarySearch,
    })
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^u)` without overflow.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Mean binary cross-entropy of the shifted logits `z - alpha`.
pub fn bce_loss(split: &ClassSplit, alpha: f64) -> f64 {
    let n = split.labeled_len() as f64;
    let fake: f64 = split.fakes.iter().map(|&z| softplus(-(z - alpha))).sum();
    let real: f64 = split.reals.iter().map(|&z| softplus(z - alpha)).sum();
    (fake + real) / n
}

/// `dL/dalpha = -mean(sigmoid(z - alpha) - y)`.
pub fn bce_gradient(split: &ClassSplit, alpha: f64) -> f64 {
    let n = split.labeled_len() as f64;
    let fake: f64 = split.fakes.iter().map(|&z| sigmoid(z - alpha) - 1.0).sum();
    let real: f64 = split.reals.iter().map(|&z| sigmoid(z - alpha)).sum();
    -(fake + real) / n
}

/// Full-batch gradient descent on [`bce_loss`] with a linearly decaying step.
pub fn train_offset(split: &ClassSplit, config: &OffsetTrainingConfig) -> Result<BaselineResult> {
    let trace = train_offset_trace(split, config)?;
    let alpha = *trace.alphas.last().expect("trace holds the initial point");
    Ok(BaselineResult {
        alpha,
        accuracy_on_validation: accuracy(split, alpha)?,
        iterations: config.steps,
        method: BaselineMethod::OffsetTraining,
    })
}

/// Optimization path of [`train_offset`]: `steps + 1` offsets and their losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub alphas: Vec<f64>,
    pub losses: Vec<f64>,
}

pub fn train_offset_trace(
    split: &ClassSplit,
    config: &OffsetTrainingConfig,
) -> Result<TrainingTrace> {
    split.require_both()?;
    if config.steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    if !(config.initial_step_size > 0.0 && config.initial_step_size.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "initial step size must be > 0, got {}",
            config.initial_step_size
        )));
    }
    let mut alpha = match config.init_rule {
        InitRule::ClassMidpoint => {
            let (m0, m1) = median_by_class(split)?;
            0.5 * (m0 + m1)
        }
        InitRule::Zero => 0.0,
    };
    let mut alphas = Vec::with_capacity(config.steps + 1);
    let mut losses = Vec::with_capacity(config.steps + 1);
    alphas.push(alpha);
    losses.push(bce_loss(split, alpha));
    for step in 0..config.steps {
        let lr = config.initial_step_size * (1.0 - step as f64 / config.steps as f64);
        alpha -= lr * bce_gradient(split, alpha);
        let loss = bce_loss(split, alpha);
        if !alpha.is_finite() || !loss.is_finite() {
            return Err(Error::Divergence {
                step,
                detail: format!("alpha={alpha}, loss={loss}; reduce the step size"),
            });
        }
        alphas.push(alpha);
        losses.push(loss);
    }
    Ok(TrainingTrace { alphas, losses })
}

/// Best achievable validation accuracy: tries a threshold below every logit and
/// one at every midpoint between consecutive distinct logits.
pub fn exhaustive_threshold_sweep(split: &ClassSplit) -> Result<BaselineResult> {
    let mut logits: Vec<f64> = split.reals.iter().chain(&split.fakes).copied().collect();
    if logits.is_empty() {
        return Err(Error::NoLabels);
    }
    logits.sort_by(f64::total_cmp);
    logits.dedup();
    let mut candidates = Vec::with_capacity(logits.len() + 1);
    candidates.push(logits[0] - 1.0);
    candidates.extend(logits.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(logits[logits.len() - 1]);

    let mut best = (candidates[0], accuracy(split, candidates[0])?);
    for &alpha in &candidates[1..] {
        let acc = accuracy(split, alpha)?;
        if acc > best.1 {
            best = (alpha, acc);
        }
    }
    Ok(BaselineResult {
        alpha: best.0,
        accuracy_on_validation: best.1,
        iterations: candidates.len(),
        method: BaselineMethod::ExhaustiveSweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let s = ClassSplit::from_parts(vec![-1.0], vec![2.0]);
        assert_eq!(accuracy(&s, 0.0).unwrap(), 1.0);
        let s = ClassSplit::from_parts(vec![2.0], vec![-1.0]);
        assert_eq!(accuracy(&s, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn tie_predicts_real() {
        let s = ClassSplit::from_parts(vec![0.7], vec![]);
        assert_eq!(accuracy(&s, 0.7).unwrap(), 1.0);
        let s = ClassSplit::from_parts(vec![], vec![0.7]);
        assert_eq!(accuracy(&s, 0.7).unwrap(), 0.0);
        assert!(accuracy(&ClassSplit::default(), 0.0).is_err());
    }

    #[test]
    fn binary_search_separable_pair() {
        let s = ClassSplit::from_parts(vec![-1.0], vec![1.0]);
        let r = binary_search_threshold(&s, None).unwrap();
        assert!(r.alpha > -1.0 && r.alpha < 1.0);
        assert_eq!(r.accuracy_on_validation, 1.0);
        assert!(r.iterations > 0);
    }

    #[test]
    fn binary_search_needs_both_classes() {
        let s = ClassSplit::from_parts(vec![-1.0, 2.0], vec![]);
        assert!(binary_search_threshold(&s, None).is_err());
    }

    #[test]
    fn offset_training_separated_from_zero() {
        let s = ClassSplit::from_parts(vec![-5.0; 10], vec![5.0; 10]);
        let cfg = OffsetTrainingConfig {
            init_rule: InitRule::Zero,
            ..Default::default()
        };
        let r = train_offset(&s, &cfg).unwrap();
        assert!(r.alpha > -5.0 && r.alpha < 5.0);
        assert_eq!(r.accuracy_on_validation, 1.0);
    }

    #[test]
    fn offset_training_diverges_loudly() {
        let s = ClassSplit::from_parts(vec![-1.0, 0.0], vec![0.5, 1.0]);
        let cfg = OffsetTrainingConfig {
            initial_step_size: f64::INFINITY,
            ..Default::default()
        };
        assert!(train_offset(&s, &cfg).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn sweep_finds_the_separating_gap() {
        let s = ClassSplit::from_parts(vec![-3.0, -2.0, 0.5], vec![0.0, 1.0, 2.0]);
        let r = exhaustive_threshold_sweep(&s).unwrap();
        assert!((r.accuracy_on_validation - 5.0 / 6.0).abs() < 1e-12);
    }
}
