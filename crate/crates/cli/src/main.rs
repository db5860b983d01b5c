use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use logitcal::eval_harness::{
    calibrate, method_comparison, parse_list, render_report_plots, run_experiment,
    validation_size_sweep, EvalReport, ExperimentConfig, InputSource, Method,
};
use logitcal::kvfile::{self, KeyValues};
use logitcal::logit_data::{subsample_validation, DataFormat};
use logitcal::shift_sim::{sample_world, ShiftSpec, SCENARIOS};
use logitcal::{Error, ErrorKind, KdeConfig, LogitDataset, Result};

#[derive(Parser)]
#[command(
    name = "logitcal",
    version,
    about = "Post-hoc logit offset calibration for binary detectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one method on one dataset and print the offset as JSON.
    Calibrate(CalibrateArgs),
    /// Run a full multi-seed experiment.
    Evaluate(ExperimentArgs),
    /// Sample a synthetic logit world and write it as CSV.
    Simulate(SimulateArgs),
    /// Repeat an experiment over several validation sizes.
    Sweep(SizedArgs),
    /// Compare methods on shared validation subsets.
    Compare(SizedArgs),
    /// Re-render figures from a persisted report.json.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Key/value config file; flags given here override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Logit file (CSV or JSONL), a `.spec` file, or a scenario name.
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    format: Option<String>,
    /// Methods, comma separated or repeated.
    #[arg(long = "method")]
    methods: Vec<String>,
    #[arg(long)]
    validation_size: Option<usize>,
    /// Seeds, e.g. `0..10` or `1,2,3`; may be repeated.
    #[arg(long = "seed")]
    seeds: Vec<String>,
    /// `silverman`, `scott`, or `fixed:<h>`.
    #[arg(long)]
    bandwidth: Option<String>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    grid_pad: Option<f64>,
    #[arg(long)]
    stratified: Option<bool>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SizedArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Validation sizes, comma separated.
    #[arg(long, default_value = "10,100,1000")]
    sizes: String,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, default_value = "kde_supervised")]
    method: String,
    /// Restrict to one source tag.
    #[arg(long)]
    source: Option<String>,
    /// Fit on a seeded subsample of this size instead of the whole dataset.
    #[arg(long)]
    validation_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    bandwidth: Option<String>,
    #[arg(long)]
    grid_size: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario name or `.spec` file.
    #[arg(long, default_value = "joint-shift")]
    spec: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    #[arg(long, default_value_t = 10000)]
    n_test: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Path to a report.json written by `evaluate`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

impl ExperimentArgs {
    fn to_config(&self) -> Result<ExperimentConfig> {
        let mut kv = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                kvfile::parse(&text)?
            }
            None => KeyValues::new(),
        };
        let mut set = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                kv.insert(key.to_string(), v);
            }
        };
        set("input", self.input.clone());
        set("format", self.format.clone());
        set(
            "methods",
            (!self.methods.is_empty()).then(|| self.methods.join(",")),
        );
        set(
            "validation_size",
            self.validation_size.map(|v| v.to_string()),
        );
        set(
            "seeds",
            (!self.seeds.is_empty()).then(|| self.seeds.join(",")),
        );
        set("bandwidth", self.bandwidth.clone());
        set("grid_size", self.grid_size.map(|v| v.to_string()));
        set("grid_pad", self.grid_pad.map(|v| v.to_string()));
        set("stratified", self.stratified.map(|v| v.to_string()));
        set("n_train", self.n_train.map(|v| v.to_string()));
        set("n_test", self.n_test.map(|v| v.to_string()));
        set(
            "output_dir",
            self.out.as_ref().map(|p| p.display().to_string()),
        );
        if !kv.contains_key("input") {
            return Err(Error::Config(
                "no input given (use --input or an `input` config key)".into(),
            ));
        }
        let text: String = kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        ExperimentConfig::from_kv_str(&text)
    }
}

fn parse_format(format: Option<&str>) -> Result<Option<DataFormat>> {
    format.map(str::parse).transpose()
}

fn run_calibrate(args: &CalibrateArgs) -> Result<()> {
    let method: Method = args
        .method
        .parse()
        .map_err(|_| Error::Config(format!("unknown method '{}'", args.method)))?;
    let mut kde = KdeConfig::default();
    if let Some(rule) = &args.bandwidth {
        kde.bandwidth_rule = rule
            .parse()
            .map_err(|_| Error::Config(format!("invalid bandwidth '{rule}'")))?;
    }
    if let Some(n) = args.grid_size {
        kde.grid_size = n;
    }
    kde.validate()?;
    let mut data =
        InputSource::resolve(&args.input, parse_format(args.format.as_deref())?)?.load()?;
    if let Some(source) = &args.source {
        data = data
            .filter_source(source)
            .ok_or_else(|| Error::InvalidArgument(format!("no records with source '{source}'")))?;
    }
    if let Some(n) = args.validation_size {
        if n > data.len() {
            return Err(Error::InvalidArgument(format!(
                "validation size {n} exceeds the {} records",
                data.len()
            )));
        }
        data = subsample_validation(&data, n, args.seed, method.is_supervised())?.0;
    }
    println!("{}", calibrate(method, &data, &kde)?.to_json());
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let mut spec = match ShiftSpec::scenario(&args.spec) {
        Some(spec) => spec,
        None => {
            let path = Path::new(&args.spec);
            if path.extension().is_none_or(|e| e != "spec") {
                return Err(Error::Config(format!(
                    "unknown scenario '{}' (known: {})",
                    args.spec,
                    SCENARIOS.join(", ")
                )));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ShiftSpec::from_kv_str(&text)?
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let world = sample_world(&spec, args.n_train, args.n_test)?;
    let records = world
        .train
        .records()
        .iter()
        .chain(world.test.records())
        .cloned()
        .collect();
    LogitDataset::new(records, "simulated")?.save(&args.out, DataFormat::Csv)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&world.derived).expect("derived quantities serialize")
    );
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Calibrate(args) => run_calibrate(args),
        Command::Evaluate(args) => {
            let report = run_experiment(&args.to_config()?)?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Simulate(args) => run_simulate(args),
        Command::Sweep(args) => {
            let sizes = parse_list(&args.sizes)?;
            let sweep = validation_size_sweep(&args.experiment.to_config()?, &sizes)?;
            print!("{}", sweep.to_table());
            Ok(())
        }
        Command::Compare(args) => {
            let sizes = parse_list(&args.sizes)?;
            let report = method_comparison(&args.experiment.to_config()?, &sizes)?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Plot(args) => {
            let report = EvalReport::load(&args.report)?;
            for path in render_report_plots(&report, &args.out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Configuration => 2,
                ErrorKind::Data => 3,
                ErrorKind::Degenerate => 4,
            })
        }
    }
}
