//! Post-hoc additive calibration of binary detector logits.
//!
//! A detector emits a logit `z` and predicts "fake" when `z > 0`. Under a
//! shift between training and deployment data that default threshold is no
//! longer optimal. The calibrators in this crate estimate a scalar offset
//! `alpha` from a small target-domain sample so that the rule `z - alpha > 0`
//! tracks the shifted decision boundary:
//!
//! * [`calibrate_supervised`] minimizes a kernel-density estimate of the
//!   classification error on a labeled validation set.
//! * [`calibrate_unsupervised`] balances the first moment of the pooled logit
//!   density and needs no labels.
//! * [`baselines`] holds accuracy-driven interval halving and cross-entropy
//!   offset training for comparison.
//!
//! [`shift_sim`] generates synthetic logit worlds with analytic Bayes
//! thresholds, and [`eval_harness`] runs seeded multi-run experiments over
//! either synthetic or on-disk logits.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod brent;
pub mod calibrate_supervised;
pub mod calibrate_unsupervised;
pub mod error;
pub mod eval_harness;
pub mod kde;
pub mod kvfile;
pub mod logit_data;
pub mod shift_sim;

pub use error::{Error, ErrorKind, Result};
pub use kde::{DensityEstimate, KdeConfig};
pub use logit_data::{ClassSplit, Label, LogitDataset, LogitRecord};
