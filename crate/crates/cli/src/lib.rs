//! Experiment harness behind the `dnl` binary.
//!
//! Every subcommand is deterministic given `--seed` and writes plain CSV with
//! a header row.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dnl::baselines::{fit_ridge_grid, RegretSummary};
use dnl::data::{
    load_csv, make_knapsack, make_knapsack_fraction, make_scheduling, scheduling_instance, split,
    synthesize, CsvSchema, Fold, RawSeries, SchedulingLoad, SplitSpec,
};
use dnl::trainer::train;
use dnl::{Dataset, Evaluator, ExactOracle, LinearModel, ProblemSet, TrainConfig, TrainTrace, Variant};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] dnl::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "dnl", version, about = "Regret-trained linear predictors for knapsack and scheduling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic price series CSV.
    Generate(GenerateArgs),
    /// Warmstart with ridge, train variants, write traces and models.
    Train(TrainArgs),
    /// Per-fold test regret of model files.
    Eval(EvalArgs),
    /// Train and evaluate every variant over a list of capacities.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 30)]
    pub days: usize,
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    UnitKnapsack,
    WeightedKnapsack,
    Scheduling,
}

/// Knapsack capacity: an absolute value or `N%` of each problem set's total
/// weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Absolute(f64),
    Percent(f64),
}

impl FromStr for Capacity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (raw, pct) = match s.strip_suffix('%') {
            Some(r) => (r, true),
            None => (s, false),
        };
        let v: f64 = raw.parse().map_err(|_| format!("bad capacity {s:?}"))?;
        if !(v > 0.0 && v.is_finite()) || (pct && v > 100.0) {
            return Err(format!("capacity {s:?} out of range"));
        }
        Ok(if pct { Capacity::Percent(v) } else { Capacity::Absolute(v) })
    }
}

impl std::fmt::Display for Capacity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Capacity::Absolute(v) => write!(f, "{v}"),
            Capacity::Percent(v) => write!(f, "{v}%"),
        }
    }
}

/// A trainable method: ridge or one of the regret-trained variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ridge,
    Regret(Variant),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ridge => "ridge",
            Method::Regret(v) => v.name(),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ridge" {
            Ok(Method::Ridge)
        } else {
            s.parse().map(Method::Regret).map_err(|e: dnl::Error| e.to_string())
        }
    }
}

/// Where the data comes from and which problem is built from it.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Price CSV (timestamp, feature columns, price); synthesized when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub days: usize,
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = ProblemKind::UnitKnapsack)]
    pub problem: ProblemKind,
    /// Scheduling machines.
    #[arg(long, default_value_t = 2)]
    pub machines: usize,
    /// Scheduling jobs.
    #[arg(long, default_value_t = 3)]
    pub jobs: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainOpts {
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long = "max-seconds", default_value_t = 120.0)]
    pub max_seconds: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Early-stopping patience in epochs; 0 disables.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
}

impl TrainOpts {
    fn config(&self, variant: Variant, seed: u64) -> TrainConfig {
        TrainConfig {
            variant,
            batch_size: self.batch,
            learning_rate: self.lr,
            max_epochs: self.epochs,
            max_seconds: self.max_seconds,
            early_stop_patience: self.patience,
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Knapsack capacity, absolute or as a percentage such as `30%`.
    #[arg(long)]
    pub capacity: Option<Capacity>,
    /// Method to train; repeatable.
    #[arg(long = "variant", default_values_t = [Method::Regret(Variant::Dnl)], value_parser = parse_method)]
    pub variants: Vec<Method>,
    /// Which fold's train and validation splits to use.
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub capacity: Option<Capacity>,
    /// Model file; repeatable.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Also fit a ridge baseline on each fold.
    #[arg(long)]
    pub ridge: bool,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Capacity; repeatable.
    #[arg(long = "capacity")]
    pub capacities: Vec<Capacity>,
    /// Method; repeatable.
    #[arg(long = "variant", value_parser = parse_method)]
    pub variants: Vec<Method>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs one parsed command, writing a short summary to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, stdout),
        Command::Train(a) => cmd_train(&a, stdout),
        Command::Eval(a) => cmd_eval(&a, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout),
    }
}

pub fn cmd_generate(args: &GenerateArgs, stdout: &mut dyn std::io::Write) -> CliResult<()> {
    if args.days == 0 {
        return Err(CliError::Usage("--days must be at least 1".into()));
    }
    let series = synthesize(args.days, args.features, args.noise, args.seed)?;
    series.write_csv(&args.out)?;
    writeln!(stdout, "days,features,seed,rows\n{},{},{},{}", args.days, args.features, args.seed, series.rows.len())
        .map_err(io_err(&args.out))?;
    Ok(())
}

fn load_series(args: &DataArgs) -> CliResult<RawSeries> {
    match &args.data {
        Some(path) => Ok(load_csv(path, &CsvSchema::default())?),
        None => {
            if args.days == 0 {
                return Err(CliError::Usage("--days must be at least 1".into()));
            }
            Ok(synthesize(args.days, args.features, args.noise, args.seed)?)
        }
    }
}

fn default_capacity(problem: ProblemKind) -> Capacity {
    match problem {
        ProblemKind::WeightedKnapsack => Capacity::Percent(30.0),
        _ => Capacity::Absolute(20.0),
    }
}

/// Builds the dataset for one capacity.
pub fn build_dataset(args: &DataArgs, series: &RawSeries, capacity: Option<Capacity>) -> CliResult<Dataset> {
    let dataset = match args.problem {
        ProblemKind::Scheduling => {
            let load = SchedulingLoad {
                machines: args.machines,
                jobs: args.jobs,
                seed: args.seed,
            };
            make_scheduling(series, &scheduling_instance(&load, series.group_size)?)?
        }
        kind => {
            let weighted = kind == ProblemKind::WeightedKnapsack;
            match capacity.unwrap_or(default_capacity(kind)) {
                Capacity::Absolute(c) => make_knapsack(series, weighted, c, args.seed)?,
                Capacity::Percent(p) => make_knapsack_fraction(series, weighted, p / 100.0, args.seed)?,
            }
        }
    };
    Ok(dataset)
}

fn folds_for(args: &DataArgs, n: usize) -> CliResult<Vec<Fold>> {
    if args.folds == 0 {
        return Err(CliError::Usage("--folds must be at least 1".into()));
    }
    Ok(split(
        n,
        &SplitSpec {
            folds: args.folds,
            ..SplitSpec::default()
        },
    )?)
}

/// Ridge warmstart followed by regret training. Ridge alone yields a trace
/// holding only its epoch-0 record.
pub fn fit_method(
    method: Method,
    train_sets: &[ProblemSet],
    validation: &[ProblemSet],
    opts: &TrainOpts,
    seed: u64,
    eval: &Evaluator<'_>,
) -> CliResult<TrainTrace> {
    let (ridge, l2) = fit_ridge_grid(train_sets, validation, eval)?;
    log::info!("ridge warmstart with l2 penalty {l2}");
    let (variant, epochs) = match method {
        Method::Ridge => (Variant::Dnl, 0),
        Method::Regret(v) => (v, opts.epochs),
    };
    let mut config = opts.config(variant, seed);
    config.max_epochs = epochs;
    Ok(train(train_sets, validation, &config, eval, &ridge)?)
}

pub fn cmd_train(args: &TrainArgs, stdout: &mut dyn std::io::Write) -> CliResult<()> {
    let series = load_series(&args.data)?;
    let dataset = build_dataset(&args.data, &series, args.capacity)?;
    let folds = folds_for(&args.data, dataset.len())?;
    let fold = folds
        .get(args.fold)
        .ok_or_else(|| CliError::Usage(format!("--fold {} out of range for {} folds", args.fold, folds.len())))?;
    let train_sets = dataset.select(&fold.train);
    let validation = dataset.select(&fold.validation);
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;

    writeln!(stdout, "variant,best_epoch,train_regret,val_regret,oracle_calls").map_err(io_err(&args.out))?;
    for &method in &args.variants {
        let oracle = ExactOracle;
        let eval = Evaluator::new(&oracle);
        let trace = fit_method(method, &train_sets, &validation, &args.opts, args.data.seed, &eval)?;
        if trace.truncated {
            log::warn!("{method}: time budget exhausted after {} epochs", trace.epochs.len() - 1);
        }
        let name = method.name();
        let trace_path = args.out.join(format!("trace-{name}.csv"));
        trace.write_csv(fs::File::create(&trace_path).map_err(io_err(&trace_path))?, false)?;
        let timing_path = args.out.join(format!("timing-{name}.csv"));
        write_timing(&trace, &timing_path)?;
        let model_path = args.out.join(format!("model-{name}.txt"));
        write_model(&trace.best_model, &model_path)?;
        let best = &trace.epochs[trace.best_epoch];
        writeln!(
            stdout,
            "{name},{},{},{},{}",
            trace.best_epoch,
            best.train_regret,
            best.val_regret,
            trace.total_oracle_calls()
        )
        .map_err(io_err(&args.out))?;
    }
    Ok(())
}

fn write_timing(trace: &TrainTrace, path: &Path) -> CliResult<()> {
    let mut out = String::from("epoch,seconds\n");
    for e in &trace.epochs {
        let _ = writeln!(out, "{},{:.6}", e.epoch, e.seconds);
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Writes the model text format: dimension, coefficients, intercept.
pub fn write_model(model: &LinearModel, path: &Path) -> CliResult<()> {
    fs::write(path, format_model(model)).map_err(io_err(path))
}

pub fn format_model(model: &LinearModel) -> String {
    let coef: Vec<String> = model.coefficients().iter().map(f64::to_string).collect();
    format!("{}\n{}\n{}\n", model.dim(), coef.join(" "), model.intercept())
}

pub fn read_model(path: &Path) -> CliResult<LinearModel> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_model(&text).map_err(|message| {
        CliError::Runtime(dnl::Error::Format {
            path: path.to_owned(),
            message,
        })
    })
}

pub fn parse_model(text: &str) -> Result<LinearModel, String> {
    let mut lines = text.lines();
    let p: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or("first line must be the coefficient count")?;
    let coef: Vec<f64> = lines
        .next()
        .ok_or("missing coefficient line")?
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad coefficient {t:?}")))
        .collect::<Result<_, _>>()?;
    if coef.len() != p {
        return Err(format!("expected {p} coefficients, found {}", coef.len()));
    }
    let intercept: f64 = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or("third line must be the intercept")?;
    if lines.any(|l| !l.trim().is_empty()) {
        return Err("trailing content after the intercept".into());
    }
    LinearModel::new(coef, intercept).map_err(|e| e.to_string())
}

/// One per-fold result row plus the aggregate over folds.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldTable {
    pub name: String,
    pub per_fold: Vec<RegretSummary>,
}

impl FoldTable {
    /// Mean of the fold means and the sample std of the fold means.
    pub fn aggregate(&self) -> RegretSummary {
        let means: Vec<f64> = self.per_fold.iter().map(|s| s.mean).collect();
        RegretSummary::from_values(&means)
    }
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn std::io::Write) -> CliResult<()> {
    if args.models.is_empty() && !args.ridge {
        return Err(CliError::Usage("give at least one --model or --ridge".into()));
    }
    let series = load_series(&args.data)?;
    let dataset = build_dataset(&args.data, &series, args.capacity)?;
    let folds = folds_for(&args.data, dataset.len())?;
    let oracle = ExactOracle;
    let eval = Evaluator::new(&oracle);

    let mut tables = Vec::new();
    for path in &args.models {
        let model = read_model(path)?;
        let mut per_fold = Vec::new();
        for fold in &folds {
            let test = dataset.select(&fold.test);
            per_fold.push(RegretSummary::from_values(&eval.regrets(&model, &test)?));
        }
        tables.push(FoldTable {
            name: path.display().to_string(),
            per_fold,
        });
    }
    if args.ridge {
        let mut per_fold = Vec::new();
        for fold in &folds {
            let (model, _) = fit_ridge_grid(&dataset.select(&fold.train), &dataset.select(&fold.validation), &eval)?;
            let test = dataset.select(&fold.test);
            per_fold.push(RegretSummary::from_values(&eval.regrets(&model, &test)?));
        }
        tables.push(FoldTable {
            name: "ridge".into(),
            per_fold,
        });
    }

    let mut w = csv::Writer::from_path(&args.out).map_err(dnl::Error::from)?;
    w.write_record(["model", "fold", "mean_regret", "std_regret", "count"])
        .map_err(dnl::Error::from)?;
    for t in &tables {
        for (f, s) in t.per_fold.iter().enumerate() {
            w.write_record([t.name.clone(), f.to_string(), format!("{:?}", s.mean), format!("{:?}", s.std), s.count.to_string()])
                .map_err(dnl::Error::from)?;
        }
        let a = t.aggregate();
        w.write_record([t.name.clone(), "all".into(), format!("{:?}", a.mean), format!("{:?}", a.std), a.count.to_string()])
            .map_err(dnl::Error::from)?;
    }
    w.flush().map_err(io_err(&args.out))?;
    for t in &tables {
        let a = t.aggregate();
        writeln!(stdout, "{}: {:.6} +- {:.6}", t.name, a.mean, a.std).map_err(io_err(&args.out))?;
    }
    Ok(())
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub capacity: Capacity,
    pub method: Method,
    pub summary: RegretSummary,
}

/// Trains every method on every fold for each capacity; capacities are
/// visited in ascending order.
pub fn sweep(args: &SweepArgs) -> CliResult<Vec<SweepRow>> {
    if args.capacities.is_empty() {
        return Err(CliError::Usage("give at least one --capacity".into()));
    }
    let mut capacities = args.capacities.clone();
    let key = |c: &Capacity| match c {
        Capacity::Absolute(v) => (0, *v),
        Capacity::Percent(v) => (1, *v),
    };
    if capacities.iter().any(|c| key(c).0 != key(&capacities[0]).0) {
        return Err(CliError::Usage("do not mix absolute and percentage capacities".into()));
    }
    capacities.sort_by(|a, b| key(a).1.total_cmp(&key(b).1));
    capacities.dedup();
    let methods = if args.variants.is_empty() {
        vec![Method::Ridge, Method::Regret(Variant::Dnl)]
    } else {
        args.variants.clone()
    };

    let series = load_series(&args.data)?;
    let mut rows = Vec::new();
    for &capacity in &capacities {
        let dataset = build_dataset(&args.data, &series, Some(capacity))?;
        let folds = folds_for(&args.data, dataset.len())?;
        let oracle = ExactOracle;
        let eval = Evaluator::new(&oracle);
        for &method in &methods {
            let mut per_fold = Vec::new();
            for fold in &folds {
                let train_sets = dataset.select(&fold.train);
                let validation = dataset.select(&fold.validation);
                let trace = fit_method(method, &train_sets, &validation, &args.opts, args.data.seed, &eval)?;
                let test = dataset.select(&fold.test);
                per_fold.push(RegretSummary::from_values(&eval.regrets(&trace.best_model, &test)?));
            }
            let table = FoldTable {
                name: method.name().into(),
                per_fold,
            };
            log::info!("capacity {capacity} {method}: {:?}", table.aggregate());
            rows.push(SweepRow {
                capacity,
                method,
                summary: table.aggregate(),
            });
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn std::io::Write) -> CliResult<()> {
    let rows = sweep(args)?;
    let mut w = csv::Writer::from_path(&args.out).map_err(dnl::Error::from)?;
    w.write_record(["capacity", "variant", "mean_regret", "std_regret"])
        .map_err(dnl::Error::from)?;
    for r in &rows {
        w.write_record([r.capacity.to_string(), r.method.name().into(), format!("{:?}", r.summary.mean), format!("{:?}", r.summary.std)])
            .map_err(dnl::Error::from)?;
    }
    w.flush().map_err(io_err(&args.out))?;
    writeln!(stdout, "wrote {} rows to {}", rows.len(), args.out.display()).map_err(io_err(&args.out))?;
    Ok(())
}
