use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::error::{Error, Result};

/// One fitted offset for one (source, method, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub source: String,
    pub method: Method,
    pub seed: u64,
    pub alpha: f64,
    /// Accuracy of the held-out records at `alpha = 0`; `None` without labels.
    pub accuracy_before: Option<f64>,
    pub accuracy_after: Option<f64>,
    pub delta: Option<f64>,
    pub validation_ids: Vec<String>,
    pub test_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample mean and standard deviation (`n - 1` denominator; zero for one value).
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }

    fn percent(value: Option<Self>) -> String {
        match value {
            Some(ms) => format!("{:.2} ± {:.2}", 100.0 * ms.mean, 100.0 * ms.std),
            None => "n/a".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub source: String,
    pub method: Method,
    pub runs: usize,
    pub alpha: MeanStd,
    pub accuracy_before: Option<MeanStd>,
    pub accuracy_after: Option<MeanStd>,
    pub delta: Option<MeanStd>,
}

impl Aggregate {
    pub fn from_rows(source: &str, method: Method, rows: &[&SeedRow]) -> Option<Self> {
        let collect = |f: fn(&SeedRow) -> Option<f64>| -> Vec<f64> {
            rows.iter().filter_map(|r| f(r)).collect()
        };
        Some(Self {
            source: source.to_string(),
            method,
            runs: rows.len(),
            alpha: MeanStd::of(&rows.iter().map(|r| r.alpha).collect::<Vec<_>>())?,
            accuracy_before: MeanStd::of(&collect(|r| r.accuracy_before)),
            accuracy_after: MeanStd::of(&collect(|r| r.accuracy_after)),
            delta: MeanStd::of(&collect(|r| r.delta)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub rows: Vec<SeedRow>,
    pub aggregates: Vec<Aggregate>,
}

impl EvalReport {
    pub fn from_rows(config: ExperimentConfig, rows: Vec<SeedRow>) -> Self {
        let aggregates = aggregate_rows(&rows);
        Self {
            config,
            rows,
            aggregates,
        }
    }

    pub fn aggregate(&self, source: &str, method: Method) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.source == source && a.method == method)
    }

    pub fn sources(&self) -> Vec<String> {
        let mut s: Vec<String> = self.rows.iter().map(|r| r.source.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Human-readable table of the aggregates, accuracies in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:<18} {:>5} {:>18} {:>16} {:>16} {:>16}",
            "source", "method", "runs", "alpha", "acc@0 (%)", "acc@alpha (%)", "delta (%)"
        );
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{:<20} {:<18} {:>5} {:>18} {:>16} {:>16} {:>16}",
                a.source,
                a.method.name(),
                a.runs,
                format!("{:.4} ± {:.4}", a.alpha.mean, a.alpha.std),
                MeanStd::percent(a.accuracy_before),
                MeanStd::percent(a.accuracy_after),
                MeanStd::percent(a.delta),
            );
        }
        out
    }

    /// Machine-readable aggregate table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "source,method,runs,alpha_mean,alpha_std,acc_before_mean,acc_before_std,\
             acc_after_mean,acc_after_std,delta_mean,delta_std\n",
        );
        let pair = |m: Option<MeanStd>| match m {
            Some(ms) => format!("{},{}", ms.mean, ms.std),
            None => ",".to_string(),
        };
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                a.source,
                a.method.name(),
                a.runs,
                a.alpha.mean,
                a.alpha.std,
                pair(a.accuracy_before),
                pair(a.accuracy_after),
                pair(a.delta)
            );
        }
        out
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let json = dir.join("report.json");
        let txt = dir.join("report.txt");
        write_file(&json, &self.to_json())?;
        write_file(&txt, &self.to_table())?;
        Ok(vec![json, txt])
    }
}

pub fn aggregate_rows(rows: &[SeedRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, Method)> =
        rows.iter().map(|r| (r.source.clone(), r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(source, method)| {
            let group: Vec<&SeedRow> = rows
                .iter()
                .filter(|r| r.source == source && r.method == method)
                .collect();
            Aggregate::from_rows(&source, method, &group)
        })
        .collect()
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Per (size, source, method) summary of a validation-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub validation_size: usize,
    pub source: String,
    pub method: Method,
    pub alpha: MeanStd,
    pub accuracy_after: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub sizes: Vec<usize>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, size: usize, source: &str, method: Method) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.validation_size == size && r.source == source && r.method == method)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6} {:<20} {:<18} {:>12} {:>12} {:>16}",
            "size", "source", "method", "alpha mean", "alpha std", "acc@alpha (%)"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:<20} {:<18} {:>12.4} {:>12.4} {:>16}",
                r.validation_size,
                r.source,
                r.method.name(),
                r.alpha.mean,
                r.alpha.std,
                MeanStd::percent(r.accuracy_after)
            );
        }
        out
    }

    pub fn persist(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let json = dir.join("sweep.json");
        let txt = dir.join("sweep.txt");
        write_file(
            &json,
            &serde_json::to_string_pretty(self).expect("serializable"),
        )?;
        write_file(&txt, &self.to_table())?;
        Ok(vec![json, txt])
    }
}

/// Row label of a method comparison: a calibrator or the exhaustive-sweep oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum ComparisonEntry {
    Method(Method),
    Oracle(OracleTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleTag {
    Oracle,
}

impl ComparisonEntry {
    pub const ORACLE: ComparisonEntry = ComparisonEntry::Oracle(OracleTag::Oracle);

    pub fn name(self) -> &'static str {
        match self {
            ComparisonEntry::Method(m) => m.name(),
            ComparisonEntry::Oracle(_) => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub validation_size: usize,
    pub source: String,
    pub entry: ComparisonEntry,
    pub validation_accuracy: MeanStd,
    pub test_accuracy: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub sizes: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, size: usize, source: &str, entry: ComparisonEntry) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.validation_size == size && r.source == source && r.entry == entry)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6} {:<20} {:<18} {:>18} {:>18}",
            "size", "source", "method", "val acc (%)", "test acc (%)"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:<20} {:<18} {:>18} {:>18}",
                r.validation_size,
                r.source,
                r.entry.name(),
                MeanStd::percent(Some(r.validation_accuracy)),
                MeanStd::percent(r.test_accuracy)
            );
        }
        out
    }

    pub fn persist(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let json = dir.join("comparison.json");
        let txt = dir.join("comparison.txt");
        write_file(
            &json,
            &serde_json::to_string_pretty(self).expect("serializable"),
        )?;
        write_file(&txt, &self.to_table())?;
        Ok(vec![json, txt])
    }
}
