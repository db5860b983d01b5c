use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::{BandwidthRule, KdeConfig};
use crate::kvfile::{self, KeyValues};
use crate::logit_data::{parse_dataset, DataFormat, LogitDataset};
use crate::shift_sim::{sample_world, ShiftSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KdeSupervised,
    KdeUnsupervised,
    BinarySearch,
    OffsetTraining,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::KdeSupervised,
        Method::KdeUnsupervised,
        Method::BinarySearch,
        Method::OffsetTraining,
    ];

    pub fn is_supervised(self) -> bool {
        !matches!(self, Method::KdeUnsupervised)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::KdeSupervised => "kde_supervised",
            Method::KdeUnsupervised => "kde_unsupervised",
            Method::BinarySearch => "binary_search",
            Method::OffsetTraining => "offset_training",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().replace('-', "_").to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == wanted)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Where an experiment's logits come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSource {
    File {
        path: PathBuf,
        format: DataFormat,
    },
    /// Synthetic world; only its test domain is used as the pool.
    Simulated {
        name: String,
        spec: ShiftSpec,
        n_train: usize,
        n_test: usize,
    },
}

pub const DEFAULT_N_TRAIN: usize = 1_000;
pub const DEFAULT_N_TEST: usize = 10_000;

impl InputSource {
    /// Resolve a scenario name, a `.spec` key/value file, or a logit data file.
    pub fn resolve(value: &str, format: Option<DataFormat>) -> Result<Self> {
        if let Some(spec) = ShiftSpec::scenario(value) {
            return Ok(InputSource::Simulated {
                name: value.to_string(),
                spec,
                n_train: DEFAULT_N_TRAIN,
                n_test: DEFAULT_N_TEST,
            });
        }
        let path = PathBuf::from(value);
        if path.extension().is_some_and(|e| e == "spec") {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            return Ok(InputSource::Simulated {
                name: path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                spec: ShiftSpec::from_kv_str(&text)?,
                n_train: DEFAULT_N_TRAIN,
                n_test: DEFAULT_N_TEST,
            });
        }
        let format = format.unwrap_or_else(|| DataFormat::from_path(&path));
        Ok(InputSource::File { path, format })
    }

    pub fn load(&self) -> Result<LogitDataset> {
        let ds = match self {
            InputSource::File { path, format } => parse_dataset(path, *format)?,
            InputSource::Simulated {
                spec,
                n_train,
                n_test,
                ..
            } => sample_world(spec, *n_train, *n_test)?.test,
        };
        Ok(ds.with_row_ids())
    }

    pub fn label(&self) -> String {
        match self {
            InputSource::File { path, .. } => path.display().to_string(),
            InputSource::Simulated { name, .. } => name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub input: InputSource,
    pub methods: Vec<Method>,
    pub validation_size: usize,
    pub seeds: Vec<u64>,
    pub kde: KdeConfig,
    pub output_dir: Option<PathBuf>,
    /// Forces stratified or uniform validation draws. When unset, supervised
    /// methods draw stratified subsets and the unsupervised method uniform ones.
    pub stratified: Option<bool>,
}

impl ExperimentConfig {
    pub fn new(input: InputSource, methods: Vec<Method>) -> Self {
        Self {
            input,
            methods,
            validation_size: 100,
            seeds: (0..10).collect(),
            kde: KdeConfig::default(),
            output_dir: None,
            stratified: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.validation_size == 0 {
            return Err(Error::Config("validation_size must be >= 1".into()));
        }
        self.kde.validate()
    }

    pub fn stratified_for(&self, method: Method) -> bool {
        self.stratified.unwrap_or(method.is_supervised())
    }

    /// Build a config from a key/value file body. Recognized keys: `input`,
    /// `format`, `methods`, `validation_size`, `seeds`, `bandwidth`,
    /// `grid_size`, `grid_pad`, `bandwidth_floor`, `output_dir`, `stratified`,
    /// `n_train`, `n_test`.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let kv = kvfile::parse(text)?;
        let input = kv
            .get("input")
            .ok_or_else(|| Error::Config("missing key 'input'".into()))?;
        let format = kvfile::get_parsed::<DataFormat>(&kv, "format")?;
        let mut config = ExperimentConfig::new(InputSource::resolve(input, format)?, Vec::new());
        config.apply_overrides(&kv)?;
        if config.methods.is_empty() {
            config.methods = vec![Method::KdeSupervised];
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    fn apply_overrides(&mut self, kv: &KeyValues) -> Result<()> {
        let known = [
            "input",
            "format",
            "methods",
            "validation_size",
            "seeds",
            "bandwidth",
            "grid_size",
            "grid_pad",
            "bandwidth_floor",
            "output_dir",
            "stratified",
            "n_train",
            "n_test",
        ];
        if let Some(key) = kv.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        if let Some(methods) = kv.get("methods") {
            self.methods = parse_list(methods)?;
        }
        if let Some(n) = kvfile::get_parsed(kv, "validation_size")? {
            self.validation_size = n;
        }
        if let Some(seeds) = kv.get("seeds") {
            self.seeds = parse_list(seeds)?;
        }
        if let Some(rule) = kvfile::get_parsed::<BandwidthRule>(kv, "bandwidth")? {
            self.kde.bandwidth_rule = rule;
        }
        if let Some(v) = kvfile::get_parsed(kv, "grid_size")? {
            self.kde.grid_size = v;
        }
        if let Some(v) = kvfile::get_parsed(kv, "grid_pad")? {
            self.kde.grid_pad = v;
        }
        if let Some(v) = kvfile::get_parsed(kv, "bandwidth_floor")? {
            self.kde.bandwidth_floor = v;
        }
        if let Some(dir) = kv.get("output_dir") {
            self.output_dir = Some(PathBuf::from(dir));
        }
        if let Some(v) = kvfile::get_parsed(kv, "stratified")? {
            self.stratified = Some(v);
        }
        let n_train_override = kvfile::get_parsed::<usize>(kv, "n_train")?;
        let n_test_override = kvfile::get_parsed::<usize>(kv, "n_test")?;
        if let InputSource::Simulated {
            n_train, n_test, ..
        } = &mut self.input
        {
            if let Some(v) = n_train_override {
                *n_train = v;
            }
            if let Some(v) = n_test_override {
                *n_test = v;
            }
        } else if n_train_override.is_some() || n_test_override.is_some() {
            return Err(Error::Config(
                "n_train/n_test apply only to simulated input".into(),
            ));
        }
        Ok(())
    }
}

/// Comma-separated list, also accepting `a..b` ranges for integers.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let (lo, hi): (u64, u64) = (
                lo.trim().parse().map_err(|_| bad_item(item))?,
                hi.trim().parse().map_err(|_| bad_item(item))?,
            );
            for v in lo..hi {
                out.push(v.to_string().parse().map_err(|_| bad_item(item))?);
            }
        } else {
            out.push(item.parse().map_err(|_| bad_item(item))?);
        }
    }
    Ok(out)
}

fn bad_item(item: &str) -> Error {
    Error::Config(format!("invalid list item '{item}'"))
}
