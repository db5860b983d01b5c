//! Logit datasets: the on-disk formats, label handling, and seeded
//! validation subsampling shared by every calibrator.
//!
//! Two formats are accepted:
//!
//! * CSV with columns `logit,label,source[,id]`. An empty `label` field marks
//!   an unlabeled record. A header row is optional and detected by trying to
//!   parse the first field of the first row as a number.
//! * JSONL with one object per line and the keys `logit`, `label` (0, 1 or
//!   null), `source` and optionally `id`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth class of a record. `Fake` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn from_bit(bit: i64) -> Option<Self> {
        match bit {
            0 => Some(Label::Real),
            1 => Some(Label::Fake),
            _ => None,
        }
    }

    pub fn as_bit(self) -> u8 {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Real => f.write_str("real"),
            Label::Fake => f.write_str("fake"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub logit: f64,
    pub label: Option<Label>,
    pub source: String,
    pub id: Option<String>,
}

impl LogitRecord {
    pub fn new(logit: f64, label: Option<Label>, source: impl Into<String>) -> Self {
        Self {
            logit,
            label,
            source: source.into(),
            id: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// Guess the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("jsonl") || ext.eq_ignore_ascii_case("json") => {
                DataFormat::Jsonl
            }
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "jsonl" => Ok(DataFormat::Jsonl),
            other => Err(Error::Config(format!("unknown data format '{other}'"))),
        }
    }
}

/// An ordered, non-empty collection of logit records.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitDataset {
    records: Vec<LogitRecord>,
    provenance: String,
}

impl LogitDataset {
    pub fn new(records: Vec<LogitRecord>, provenance: impl Into<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, r) in records.iter().enumerate() {
            if !r.logit.is_finite() {
                return Err(Error::parse(i + 1, format!("non-finite logit {}", r.logit)));
            }
        }
        Ok(Self {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn records(&self) -> &[LogitRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn logits(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.logit).collect()
    }

    /// Fill in missing ids with `row-<index>` so that subsets can be compared by id.
    pub fn with_row_ids(mut self) -> Self {
        for (i, r) in self.records.iter_mut().enumerate() {
            if r.id.is_none() {
                r.id = Some(format!("row-{i}"));
            }
        }
        self
    }

    /// Distinct source tags, sorted.
    pub fn sources(&self) -> Vec<String> {
        let mut tags: Vec<String> = self.records.iter().map(|r| r.source.clone()).collect();
        tags.sort();
        tags.dedup();
        tags
    }

    /// Records carrying the given source tag, in file order.
    pub fn filter_source(&self, source: &str) -> Option<LogitDataset> {
        let records: Vec<LogitRecord> = self
            .records
            .iter()
            .filter(|r| r.source == source)
            .cloned()
            .collect();
        if records.is_empty() {
            return None;
        }
        Some(LogitDataset {
            records,
            provenance: format!("{}#{}", self.provenance, source),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("<csv writer>", std::io::Error::other(e));
        w.write_record(["logit", "label", "source", "id"])
            .map_err(io)?;
        for r in &self.records {
            let label = r.label.map(|l| l.as_bit().to_string()).unwrap_or_default();
            let id = r.id.clone().unwrap_or_default();
            w.write_record([r.logit.to_string(), label, r.source.clone(), id])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            let row = JsonRecord {
                logit: r.logit,
                label: r.label.map(|l| i64::from(l.as_bit())),
                source: r.source.clone(),
                id: r.id.clone(),
            };
            let line = serde_json::to_string(&row)
                .map_err(|e| Error::io("<jsonl writer>", std::io::Error::other(e)))?;
            writeln!(out, "{line}").map_err(|e| Error::io("<jsonl writer>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, format: DataFormat) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let buf = std::io::BufWriter::new(file);
        match format {
            DataFormat::Csv => self.write_csv(buf),
            DataFormat::Jsonl => self.write_jsonl(buf),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    logit: f64,
    #[serde(default)]
    label: Option<i64>,
    #[serde(default)]
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

pub fn parse_dataset(path: &Path, format: DataFormat) -> Result<LogitDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let provenance = path.display().to_string();
    match format {
        DataFormat::Csv => parse_csv(BufReader::new(file), provenance),
        DataFormat::Jsonl => parse_jsonl(BufReader::new(file), provenance),
    }
}

pub fn parse_csv<R: std::io::Read>(
    reader: R,
    provenance: impl Into<String>,
) -> Result<LogitDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    for (row_index, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = row
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(row_index + 1);
        let first = row.get(0).unwrap_or("");
        if row_index == 0 && first.parse::<f64>().is_err() {
            // header row
            continue;
        }
        if row.len() == 1 && first.is_empty() {
            continue;
        }
        records.push(csv_record(&row, line)?);
    }
    LogitDataset::new(records, provenance)
}

fn csv_record(row: &csv::StringRecord, line: usize) -> Result<LogitRecord> {
    let raw = row.get(0).unwrap_or("");
    let logit = parse_logit(raw, line)?;
    let label = match row.get(1).unwrap_or("") {
        "" => None,
        text => Some(parse_label_text(text, line)?),
    };
    let source = row.get(2).unwrap_or("").to_string();
    let id = row.get(3).filter(|s| !s.is_empty()).map(str::to_string);
    Ok(LogitRecord {
        logit,
        label,
        source,
        id,
    })
}

fn parse_logit(raw: &str, line: usize) -> Result<f64> {
    let logit: f64 = raw
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid logit '{raw}'")))?;
    if !logit.is_finite() {
        return Err(Error::parse(line, format!("non-finite logit '{raw}'")));
    }
    Ok(logit)
}

fn parse_label_text(text: &str, line: usize) -> Result<Label> {
    match text {
        "0" => Ok(Label::Real),
        "1" => Ok(Label::Fake),
        other => Err(Error::parse(
            line,
            format!("label must be 0 or 1, got '{other}'"),
        )),
    }
}

pub fn parse_jsonl<R: BufRead>(reader: R, provenance: impl Into<String>) -> Result<LogitDataset> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if !raw.logit.is_finite() {
            return Err(Error::parse(line_no, "non-finite logit"));
        }
        let label = match raw.label {
            None => None,
            Some(bit) => Some(Label::from_bit(bit).ok_or_else(|| {
                Error::parse(line_no, format!("label must be 0 or 1, got {bit}"))
            })?),
        };
        records.push(LogitRecord {
            logit: raw.logit,
            label,
            source: raw.source,
            id: raw.id,
        });
    }
    LogitDataset::new(records, provenance)
}

/// Logits partitioned by label. Unlabeled records are counted, not kept.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassSplit {
    pub reals: Vec<f64>,
    pub fakes: Vec<f64>,
    pub unlabeled: usize,
}

impl ClassSplit {
    pub fn from_parts(reals: Vec<f64>, fakes: Vec<f64>) -> Self {
        Self {
            reals,
            fakes,
            unlabeled: 0,
        }
    }

    pub fn labeled_len(&self) -> usize {
        self.reals.len() + self.fakes.len()
    }

    pub fn class(&self, label: Label) -> &[f64] {
        match label {
            Label::Real => &self.reals,
            Label::Fake => &self.fakes,
        }
    }

    /// Errors unless both classes have at least one sample.
    pub fn require_both(&self) -> Result<()> {
        if self.reals.is_empty() {
            return Err(Error::EmptyClass(Label::Real));
        }
        if self.fakes.is_empty() {
            return Err(Error::EmptyClass(Label::Fake));
        }
        Ok(())
    }

    /// Smallest and largest labeled logit.
    pub fn logit_range(&self) -> Option<(f64, f64)> {
        self.reals
            .iter()
            .chain(&self.fakes)
            .fold(None, |acc, &z| match acc {
                None => Some((z, z)),
                Some((lo, hi)) => Some((lo.min(z), hi.max(z))),
            })
    }
}

pub fn split_by_label(ds: &LogitDataset) -> Result<ClassSplit> {
    let mut split = ClassSplit::default();
    for r in ds.records() {
        match r.label {
            Some(Label::Real) => split.reals.push(r.logit),
            Some(Label::Fake) => split.fakes.push(r.logit),
            None => split.unlabeled += 1,
        }
    }
    if split.labeled_len() == 0 {
        return Err(Error::NoLabels);
    }
    Ok(split)
}

/// Draw `n` records as a validation subset; the remainder keeps file order.
///
/// Stratified mode takes `n / 2` reals and `n - n / 2` fakes.
pub fn subsample_validation(
    ds: &LogitDataset,
    n: usize,
    seed: u64,
    stratified: bool,
) -> Result<(LogitDataset, Option<LogitDataset>)> {
    let picked = validation_indices(ds, n, seed, stratified)?;
    let mut in_validation = vec![false; ds.len()];
    for &i in &picked {
        in_validation[i] = true;
    }
    let (val, rest): (Vec<_>, Vec<_>) = ds
        .records
        .iter()
        .cloned()
        .zip(in_validation)
        .partition(|(_, v)| *v);
    let strip = |v: Vec<(LogitRecord, bool)>| v.into_iter().map(|(r, _)| r).collect::<Vec<_>>();
    let validation = LogitDataset {
        records: strip(val),
        provenance: format!("{}[validation n={n} seed={seed}]", ds.provenance),
    };
    let rest = strip(rest);
    let rest = if rest.is_empty() {
        None
    } else {
        Some(LogitDataset {
            records: rest,
            provenance: format!("{}[rest n={n} seed={seed}]", ds.provenance),
        })
    };
    Ok((validation, rest))
}

/// Indices (sorted ascending) selected by [`subsample_validation`].
pub fn validation_indices(
    ds: &LogitDataset,
    n: usize,
    seed: u64,
    stratified: bool,
) -> Result<Vec<usize>> {
    if n == 0 || n > ds.len() {
        return Err(Error::InvalidArgument(format!(
            "validation size {n} outside [1, {}]",
            ds.len()
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut picked = if stratified {
        let mut reals = Vec::new();
        let mut fakes = Vec::new();
        for (i, r) in ds.records.iter().enumerate() {
            match r.label {
                Some(Label::Real) => reals.push(i),
                Some(Label::Fake) => fakes.push(i),
                None => {}
            }
        }
        if reals.is_empty() || fakes.is_empty() {
            return Err(Error::InvalidArgument(
                "stratified sampling needs both labels present".into(),
            ));
        }
        let (want_real, want_fake) = (n / 2, n - n / 2);
        if reals.len() < want_real || fakes.len() < want_fake {
            return Err(Error::InvalidArgument(format!(
                "stratified validation size {n} needs {want_real} reals and {want_fake} fakes, \
                 have {} and {}",
                reals.len(),
                fakes.len()
            )));
        }
        reals.shuffle(&mut rng);
        fakes.shuffle(&mut rng);
        reals.truncate(want_real);
        fakes.truncate(want_fake);
        reals.extend(fakes);
        reals
    } else {
        let mut all: Vec<usize> = (0..ds.len()).collect();
        all.shuffle(&mut rng);
        all.truncate(n);
        all
    };
    picked.sort_unstable();
    Ok(picked)
}

/// Median with the mean-of-middle-pair convention for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}

pub fn median_by_class(split: &ClassSplit) -> Result<(f64, f64)> {
    let m0 = median(&split.reals).ok_or(Error::EmptyClass(Label::Real))?;
    let m1 = median(&split.fakes).ok_or(Error::EmptyClass(Label::Fake))?;
    Ok((m0, m1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(body: &str) -> Result<LogitDataset> {
        parse_csv(body.as_bytes(), "inline")
    }

    #[test]
    fn csv_maps_fields() {
        let ds = csv("0.5,1,progan\n").unwrap();
        assert_eq!(
            ds.records(),
            &[LogitRecord::new(0.5, Some(Label::Fake), "progan")]
        );
    }

    #[test]
    fn csv_empty_label_is_unlabeled() {
        let ds = csv("-1.0,,real\n").unwrap();
        assert_eq!(ds.records()[0].label, None);
        assert_eq!(ds.records()[0].logit, -1.0);
    }

    #[test]
    fn csv_rejects_nan_with_line_number() {
        match csv("nan,0,x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_header_is_detected_and_lines_count_from_file_start() {
        let ds = csv("logit,label,source,id\n1.5,0,a,r1\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records()[0].id.as_deref(), Some("r1"));
        match csv("logit,label,source\n1,0,a\ninf,1,b\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_rejects_bad_label() {
        assert!(matches!(
            csv("1.0,2,x\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(csv("1.0,0.5,x\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(csv(""), Err(Error::EmptyDataset)));
        assert!(matches!(
            csv("logit,label,source\n"),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn jsonl_parses_null_and_missing_labels() {
        let body = r#"{"logit": 0.5, "label": 1, "source": "sd14", "id": "a"}
{"logit": -2, "label": null, "source": "real"}

{"logit": 3.25, "source": "x"}
"#;
        let ds = parse_jsonl(body.as_bytes(), "inline").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records()[0].label, Some(Label::Fake));
        assert_eq!(ds.records()[1].label, None);
        assert_eq!(ds.records()[2].label, None);
    }

    #[test]
    fn jsonl_rejects_bad_label_with_line() {
        let body = "{\"logit\": 0.5, \"label\": 0, \"source\": \"a\"}\n{\"logit\": 0.5, \"label\": 3, \"source\": \"a\"}\n";
        assert!(matches!(
            parse_jsonl(body.as_bytes(), "inline"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file() {
        let err = parse_dataset(Path::new("/nonexistent/logits.csv"), DataFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    fn labeled(labels: &[Option<u8>]) -> LogitDataset {
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                LogitRecord::new(i as f64, l.and_then(|b| Label::from_bit(b.into())), "s")
            })
            .collect();
        LogitDataset::new(records, "test").unwrap()
    }

    #[test]
    fn split_counts() {
        let s = split_by_label(&labeled(&[Some(0), Some(1), Some(1)])).unwrap();
        assert_eq!((s.reals.len(), s.fakes.len()), (1, 2));
        let s = split_by_label(&labeled(&[Some(0), Some(0)])).unwrap();
        assert!(s.fakes.is_empty());
        let s = split_by_label(&labeled(&[Some(0), None, Some(1)])).unwrap();
        assert_eq!(s.unlabeled, 1);
        assert!(matches!(
            split_by_label(&labeled(&[None, None])),
            Err(Error::NoLabels)
        ));
    }

    #[test]
    fn subsample_full_size_leaves_nothing() {
        let ds = labeled(&[Some(0), Some(1), None]);
        let (val, rest) = subsample_validation(&ds, 3, 1, false).unwrap();
        assert_eq!(val.len(), 3);
        assert!(rest.is_none());
    }

    #[test]
    fn subsample_rejects_bad_sizes() {
        let ds = labeled(&[Some(0), Some(1)]);
        assert!(subsample_validation(&ds, 0, 1, false).is_err());
        assert!(subsample_validation(&ds, 3, 1, false).is_err());
        let single = labeled(&[Some(0), Some(0), Some(0)]);
        assert!(subsample_validation(&single, 2, 1, true).is_err());
    }

    #[test]
    fn subsample_is_deterministic() {
        let ds = labeled(&[Some(1); 50]);
        let a = subsample_validation(&ds, 10, 42, false).unwrap();
        let b = subsample_validation(&ds, 10, 42, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_ten_gives_five_and_five() {
        let labels: Vec<_> = (0..40).map(|i| Some(u8::from(i % 4 == 0))).collect();
        let ds = labeled(&labels);
        let (val, _) = subsample_validation(&ds, 10, 3, true).unwrap();
        let s = split_by_label(&val).unwrap();
        assert_eq!((s.reals.len(), s.fakes.len()), (5, 5));
        let (val, _) = subsample_validation(&ds, 7, 3, true).unwrap();
        let s = split_by_label(&val).unwrap();
        assert_eq!((s.reals.len(), s.fakes.len()), (3, 4));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[1.0, 3.0]), Some(2.0));
        assert_eq!(median(&[5.0]), Some(5.0));
        assert_eq!(median(&[1.0, 2.0, 100.0]), Some(2.0));
        assert_eq!(median(&[]), None);
        let split = ClassSplit::from_parts(vec![1.0, 3.0], vec![5.0]);
        assert_eq!(median_by_class(&split).unwrap(), (2.0, 5.0));
        let split = ClassSplit::from_parts(vec![1.0], vec![]);
        assert!(matches!(
            median_by_class(&split),
            Err(Error::EmptyClass(Label::Fake))
        ));
    }
}
