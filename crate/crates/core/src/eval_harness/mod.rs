//! Seeded calibration experiments: per-source validation draws, fitting,
//! held-out evaluation, aggregation, sweeps, comparisons and plots.
//!
//! Every (source, seed) work item draws its validation subset with a seed
//! derived from the experiment seed and the source index, so results do not
//! depend on execution order.

mod config;
mod plot;
mod report;

use serde::Serialize;

pub use config::{
    parse_list, ExperimentConfig, InputSource, Method, DEFAULT_N_TEST, DEFAULT_N_TRAIN,
};
pub use plot::{emit_plots, render_report_plots, render_svg, source_densities, SourceDensities};
pub use report::{
    aggregate_rows, Aggregate, ComparisonEntry, ComparisonReport, ComparisonRow, EvalReport,
    MeanStd, OracleTag, SeedRow, SweepReport, SweepRow,
};

use crate::baselines::{
    accuracy, binary_search_threshold, exhaustive_threshold_sweep, train_offset,
    OffsetTrainingConfig,
};
use crate::calibrate_supervised;
use crate::calibrate_unsupervised;
use crate::error::{Error, Result};
use crate::kde::KdeConfig;
use crate::logit_data::{split_by_label, subsample_validation, ClassSplit, LogitDataset};

/// A fitted offset with method-specific diagnostics. Serializes with a
/// `method` tag, e.g. `{"method":"kde_supervised","alpha":..,"risk":..,"iterations":..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Calibration {
    KdeSupervised {
        alpha: f64,
        risk: f64,
        iterations: usize,
    },
    KdeUnsupervised {
        alpha: f64,
        residual: f64,
    },
    BinarySearch {
        alpha: f64,
        accuracy_on_validation: f64,
        iterations: usize,
    },
    OffsetTraining {
        alpha: f64,
        accuracy_on_validation: f64,
        iterations: usize,
    },
}

impl Calibration {
    pub fn alpha(&self) -> f64 {
        match *self {
            Calibration::KdeSupervised { alpha, .. }
            | Calibration::KdeUnsupervised { alpha, .. }
            | Calibration::BinarySearch { alpha, .. }
            | Calibration::OffsetTraining { alpha, .. } => alpha,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("calibration is always serializable")
    }
}

/// Fit one method on a dataset. The unsupervised method uses every logit,
/// labeled or not; the others use the labeled records only.
pub fn calibrate(method: Method, data: &LogitDataset, kde: &KdeConfig) -> Result<Calibration> {
    if method == Method::KdeUnsupervised {
        let r = calibrate_unsupervised::calibrate(&data.logits(), kde)?;
        return Ok(Calibration::KdeUnsupervised {
            alpha: r.alpha,
            residual: r.residual,
        });
    }
    let split = split_by_label(data)?;
    calibrate_labeled(method, &split, kde)
}

fn calibrate_labeled(method: Method, split: &ClassSplit, kde: &KdeConfig) -> Result<Calibration> {
    split.require_both()?;
    Ok(match method {
        Method::KdeSupervised => {
            let r = calibrate_supervised::calibrate(split, kde)?;
            Calibration::KdeSupervised {
                alpha: r.alpha,
                risk: r.risk,
                iterations: r.iterations,
            }
        }
        Method::BinarySearch => {
            let r = binary_search_threshold(split, None)?;
            Calibration::BinarySearch {
                alpha: r.alpha,
                accuracy_on_validation: r.accuracy_on_validation,
                iterations: r.iterations,
            }
        }
        Method::OffsetTraining => {
            let r = train_offset(split, &OffsetTrainingConfig::default())?;
            Calibration::OffsetTraining {
                alpha: r.alpha,
                accuracy_on_validation: r.accuracy_on_validation,
                iterations: r.iterations,
            }
        }
        Method::KdeUnsupervised => {
            let all: Vec<f64> = split.reals.iter().chain(&split.fakes).copied().collect();
            let r = calibrate_unsupervised::calibrate(&all, kde)?;
            Calibration::KdeUnsupervised {
                alpha: r.alpha,
                residual: r.residual,
            }
        }
    })
}

/// SplitMix64 finalizer over the experiment seed and a work-item index.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pools keyed by source tag, in sorted tag order.
pub fn source_pools(data: &LogitDataset) -> Vec<(String, LogitDataset)> {
    data.sources()
        .into_iter()
        .map(|s| {
            let pool = data.filter_source(&s).expect("tag taken from the dataset");
            (s, pool)
        })
        .collect()
}

/// The validation/test split used for one work item.
pub fn experiment_split(
    pool: &LogitDataset,
    source_index: usize,
    seed: u64,
    validation_size: usize,
    stratified: bool,
) -> Result<(LogitDataset, Option<LogitDataset>)> {
    subsample_validation(
        pool,
        validation_size,
        mix_seed(seed, source_index as u64),
        stratified,
    )
}

fn held_out_accuracy(rest: Option<&LogitDataset>, alpha: f64) -> Option<f64> {
    let split = split_by_label(rest?).ok()?;
    accuracy(&split, alpha).ok()
}

fn check_supervised_inputs(config: &ExperimentConfig, data: &LogitDataset) -> Result<()> {
    if config.methods.iter().any(|m| m.is_supervised()) {
        let split = split_by_label(data)?;
        split.require_both()?;
    }
    Ok(())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let data = config.input.load()?;
    check_supervised_inputs(config, &data)?;
    let pools = source_pools(&data);

    let mut rows = Vec::new();
    for (source_index, (source, pool)) in pools.iter().enumerate() {
        if config.validation_size > pool.len() {
            return Err(Error::InvalidArgument(format!(
                "validation size {} exceeds the {} records of source '{source}'",
                config.validation_size,
                pool.len()
            )));
        }
        for &seed in &config.seeds {
            for &method in &config.methods {
                let (validation, rest) = experiment_split(
                    pool,
                    source_index,
                    seed,
                    config.validation_size,
                    config.stratified_for(method),
                )?;
                let fitted = calibrate(method, &validation, &config.kde)?;
                let alpha = fitted.alpha();
                let before = held_out_accuracy(rest.as_ref(), 0.0);
                let after = held_out_accuracy(rest.as_ref(), alpha);
                rows.push(SeedRow {
                    source: source.clone(),
                    method,
                    seed,
                    alpha,
                    accuracy_before: before,
                    accuracy_after: after,
                    delta: before.zip(after).map(|(b, a)| a - b),
                    validation_ids: validation
                        .records()
                        .iter()
                        .filter_map(|r| r.id.clone())
                        .collect(),
                    test_count: rest.as_ref().map_or(0, LogitDataset::len),
                });
            }
        }
    }

    let report = EvalReport::from_rows(config.clone(), rows);
    if let Some(dir) = &config.output_dir {
        report.persist(dir)?;
    }
    Ok(report)
}

/// Repeat [`run_experiment`] at each validation size and summarize the
/// spread of the fitted offsets.
pub fn validation_size_sweep(config: &ExperimentConfig, sizes: &[usize]) -> Result<SweepReport> {
    if sizes.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one validation size".into(),
        ));
    }
    let mut rows = Vec::new();
    for &size in sizes {
        let run = ExperimentConfig {
            validation_size: size,
            output_dir: None,
            ..config.clone()
        };
        let report = run_experiment(&run)?;
        for agg in report.aggregates {
            rows.push(SweepRow {
                validation_size: size,
                source: agg.source,
                method: agg.method,
                alpha: agg.alpha,
                accuracy_after: agg.accuracy_after,
            });
        }
    }
    let sweep = SweepReport {
        sizes: sizes.to_vec(),
        rows,
    };
    if let Some(dir) = &config.output_dir {
        sweep.persist(dir)?;
    }
    Ok(sweep)
}

/// Fit every method on a shared validation subset per seed and compare
/// validation and held-out accuracy, with the exhaustive threshold sweep as
/// an upper-bound row on validation accuracy.
pub fn method_comparison(config: &ExperimentConfig, sizes: &[usize]) -> Result<ComparisonReport> {
    config.validate()?;
    if config.methods.len() < 2 {
        return Err(Error::Config(
            "comparison needs at least two methods".into(),
        ));
    }
    if sizes.is_empty() {
        return Err(Error::Config(
            "comparison needs at least one validation size".into(),
        ));
    }
    let data = config.input.load()?;
    split_by_label(&data)?.require_both()?;
    let stratified = config.stratified.unwrap_or(true);
    let pools = source_pools(&data);

    let mut entries: Vec<ComparisonEntry> = config
        .methods
        .iter()
        .map(|&m| ComparisonEntry::Method(m))
        .collect();
    entries.push(ComparisonEntry::ORACLE);

    let mut rows = Vec::new();
    for &size in sizes {
        for (source_index, (source, pool)) in pools.iter().enumerate() {
            let mut val_acc = vec![Vec::new(); entries.len()];
            let mut test_acc = vec![Vec::new(); entries.len()];
            for &seed in &config.seeds {
                let (validation, rest) =
                    experiment_split(pool, source_index, seed, size, stratified)?;
                let val_split = split_by_label(&validation)?;
                for (k, entry) in entries.iter().enumerate() {
                    let alpha = match entry {
                        ComparisonEntry::Method(m) => {
                            calibrate_labeled(*m, &val_split, &config.kde)?.alpha()
                        }
                        ComparisonEntry::Oracle(_) => exhaustive_threshold_sweep(&val_split)?.alpha,
                    };
                    val_acc[k].push(accuracy(&val_split, alpha)?);
                    if let Some(acc) = held_out_accuracy(rest.as_ref(), alpha) {
                        test_acc[k].push(acc);
                    }
                }
            }
            for (k, entry) in entries.iter().enumerate() {
                rows.push(ComparisonRow {
                    validation_size: size,
                    source: source.clone(),
                    entry: *entry,
                    validation_accuracy: MeanStd::of(&val_acc[k]).expect("seeds are non-empty"),
                    test_accuracy: MeanStd::of(&test_acc[k]),
                });
            }
        }
    }
    let report = ComparisonReport {
        sizes: sizes.to_vec(),
        rows,
    };
    if let Some(dir) = &config.output_dir {
        report.persist(dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logit_data::{Label, LogitRecord};

    #[test]
    fn calibration_json_shapes() {
        let c = Calibration::KdeSupervised {
            alpha: 0.5,
            risk: 0.1,
            iterations: 12,
        };
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["method"], "kde_supervised");
        assert_eq!(v["iterations"], 12);
        let c = Calibration::KdeUnsupervised {
            alpha: -1.0,
            residual: 0.0,
        };
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["method"], "kde_unsupervised");
        assert_eq!(v.as_object().unwrap().len(), 3);
    }

    #[test]
    fn mixed_seeds_differ() {
        assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
        assert_ne!(mix_seed(0, 0), mix_seed(1, 0));
        assert_eq!(mix_seed(5, 3), mix_seed(5, 3));
    }

    #[test]
    fn supervised_on_unlabeled_input_is_degenerate() {
        let records = (0..10)
            .map(|i| LogitRecord::new(i as f64, None, "s"))
            .collect();
        let data = LogitDataset::new(records, "t").unwrap();
        let err = calibrate(Method::KdeSupervised, &data, &KdeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoLabels));
        let ok = calibrate(Method::KdeUnsupervised, &data, &KdeConfig::default()).unwrap();
        assert!((ok.alpha() - 4.5).abs() < 1e-3);
    }

    #[test]
    fn single_class_is_degenerate() {
        let records = (0..10)
            .map(|i| LogitRecord::new(i as f64, Some(Label::Real), "s"))
            .collect();
        let data = LogitDataset::new(records, "t").unwrap();
        let err = calibrate(Method::BinarySearch, &data, &KdeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyClass(Label::Fake)));
    }
}
