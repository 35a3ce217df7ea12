//! `graph-dlm`: train, apply and score graph-diffusion DLM speed forecasters.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::Timelike;
use clap::{Args, Parser, Subcommand};
use graph_dlm::data::{load_speeds, split_days, to_day_tensor, DayTensor, LoadOptions, SpeedSeries, TIMESTAMP_FORMAT};
use graph_dlm::eval::{diagnostics, evaluate, write_diagnostics_csv};
use graph_dlm::evidence::OptimizerConfig;
use graph_dlm::graph::{build_graph, GraphConfig};
use graph_dlm::inputs::load_inputs;
use graph_dlm::synthetic::{generate, PlantedSpec};
use graph_dlm::train::{train, TrainConfig};
use graph_dlm::{TrainedModel, TransitionMode};

use config::FileConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or inputs that do not fit together; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

/// Tags a library error with the stage that raised it.
fn ctx(stage: &'static str) -> impl Fn(graph_dlm::Error) -> CliError {
    move |e| {
        use graph_dlm::Error as E;
        let msg = format!("{stage}: {e}");
        match e {
            E::Config(_) | E::SensorMismatch(_) | E::HorizonExceedsDay { .. } => CliError::Usage(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "graph-dlm",
    version,
    about = "Forecast daily-periodic sensor speeds with graph-diffusion priors"
)]
struct Cli {
    /// Maximum worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// key=value file supplying defaults for any long flag; flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one transition per time-of-day slot and write a model file
    Train(TrainArgs),
    /// Forecast from the last row of a speeds file
    Predict(PredictArgs),
    /// Score a model and the persistence baseline on held-out days
    Evaluate(EvaluateArgs),
    /// Per-slot data/prior contributions and short/long diffusion ratios
    Diagnostics(DiagnosticsArgs),
    /// Generate planted synthetic speeds, distances and ground truth
    Synth(SynthArgs),
}

#[derive(Args)]
struct LoadArgs {
    /// Insert all-missing rows for absent timestamps instead of failing
    #[arg(long)]
    fill_gaps: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Speeds CSV: timestamp column then one column per sensor id
    #[arg(long)]
    speeds: Option<PathBuf>,
    /// Road segment CSV with columns from,to,distance (meters)
    #[arg(long)]
    distances: Option<PathBuf>,
    /// Output model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Train on this leading fraction of whole days (default: all days)
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Distance threshold for graph edges, meters (default: automatic)
    #[arg(long)]
    kappa: Option<f64>,
    /// Gaussian edge-weight width, meters (default: automatic)
    #[arg(long)]
    sigma: Option<f64>,
    /// Tolerance defining the shortest and longest diffusion periods [default: 0.01]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of diffusion periods K [default: 5]
    #[arg(long)]
    periods: Option<usize>,
    /// Optimizer iterations per start [default: 200]
    #[arg(long)]
    max_iters: Option<usize>,
    /// Optimizer gradient tolerance [default: 1e-6]
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Optimizer starts per slot [default: 3]
    #[arg(long)]
    restarts: Option<usize>,
    /// Seed for optimizer restarts [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Do not train the transition from the last slot into the next morning
    #[arg(long)]
    no_wrap: bool,
    /// Transition form: map, prior-only or max-likelihood [default: map]
    #[arg(long)]
    mode: Option<String>,
    /// Sampling interval in minutes (needed only for one-row files)
    #[arg(long)]
    interval: Option<u32>,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `train`
    #[arg(long)]
    model: Option<PathBuf>,
    /// Recent speeds; the last row is the current snapshot
    #[arg(long)]
    speeds: Option<PathBuf>,
    /// Comma-separated horizons in minutes [default: those of 15,30,60 the interval divides]
    #[arg(long)]
    horizons: Option<String>,
    /// Also write predictive variances (mph squared)
    #[arg(long)]
    variance: bool,
    /// Output CSV (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model file written by `train`
    #[arg(long)]
    model: Option<PathBuf>,
    /// Speeds CSV holding the test days
    #[arg(long)]
    speeds: Option<PathBuf>,
    /// Comma-separated horizons in minutes [default: those of 15,30,60 the interval divides]
    #[arg(long)]
    horizons: Option<String>,
    /// Score only the days after this leading fraction (default: all days)
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Score only the persistence baseline
    #[arg(long)]
    baseline_only: bool,
    /// Directory for report.csv, report.json, per_slot.csv and diagnostics.csv
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Args)]
struct DiagnosticsArgs {
    /// Model file written by `train`
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output CSV (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for speeds.csv, distances.csv and truth.json
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Number of sensors [default: 10]
    #[arg(long)]
    sensors: Option<usize>,
    /// Slots per day [default: 48]
    #[arg(long)]
    slots: Option<usize>,
    /// Number of days [default: 200]
    #[arg(long)]
    days: Option<usize>,
    /// Number of diffusion periods K [default: 5]
    #[arg(long)]
    periods: Option<usize>,
    /// Observation noise precision [default: 25]
    #[arg(long)]
    alpha: Option<f64>,
    /// Transition perturbation precision [default: 1e4]
    #[arg(long)]
    gamma: Option<f64>,
    /// Generator seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

const TRAIN_KEYS: &[&str] = &[
    "threads",
    "speeds",
    "distances",
    "model",
    "train-fraction",
    "kappa",
    "sigma",
    "epsilon",
    "periods",
    "max-iters",
    "grad-tol",
    "restarts",
    "seed",
    "no-wrap",
    "mode",
    "interval",
    "fill-gaps",
];
const PREDICT_KEYS: &[&str] = &[
    "threads",
    "model",
    "speeds",
    "horizons",
    "variance",
    "output",
    "fill-gaps",
];
const EVALUATE_KEYS: &[&str] = &[
    "threads",
    "model",
    "speeds",
    "horizons",
    "train-fraction",
    "baseline-only",
    "output-dir",
    "fill-gaps",
];
const DIAGNOSTICS_KEYS: &[&str] = &["threads", "model", "output"];
const SYNTH_KEYS: &[&str] = &[
    "threads",
    "output-dir",
    "sensors",
    "slots",
    "days",
    "periods",
    "alpha",
    "gamma",
    "seed",
];

/// Used when no horizons are given: the ones the interval divides, else one step.
fn default_horizons(interval: u32) -> String {
    let fit: Vec<String> = [15u32, 30, 60]
        .iter()
        .filter(|m| m.is_multiple_of(interval))
        .map(u32::to_string)
        .collect();
    if fit.is_empty() {
        interval.to_string()
    } else {
        fit.join(",")
    }
}

fn required<T>(v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing required setting --{key}")))
}

fn existing(path: PathBuf, what: &str) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("{what} file not found: {}", path.display())))
    }
}

fn parse_mode(s: &str) -> CliResult<TransitionMode> {
    match s.replace('_', "-").as_str() {
        "map" => Ok(TransitionMode::Map),
        "prior-only" => Ok(TransitionMode::PriorOnly),
        "max-likelihood" => Ok(TransitionMode::MaxLikelihood),
        _ => Err(CliError::Usage(format!(
            "unknown mode {s:?}; expected map, prior-only or max-likelihood"
        ))),
    }
}

/// Minutes to steps; every horizon must be a positive multiple of the interval.
fn parse_horizons(list: &str, interval: u32) -> CliResult<Vec<usize>> {
    let mut steps = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let min: u32 = part
            .parse()
            .map_err(|_| CliError::Usage(format!("horizon {part:?} is not a whole number of minutes")))?;
        if min == 0 {
            return Err(CliError::Usage(
                "horizons must be at least one step (got 0 minutes)".into(),
            ));
        }
        if !min.is_multiple_of(interval) {
            return Err(CliError::Usage(format!(
                "horizon {min} min is not a multiple of the {interval}-minute interval"
            )));
        }
        steps.push((min / interval) as usize);
    }
    if steps.is_empty() {
        return Err(CliError::Usage("no horizons given".into()));
    }
    Ok(steps)
}

fn check_fraction(f: f64) -> CliResult<f64> {
    if f > 0.0 && f <= 1.0 {
        Ok(f)
    } else {
        Err(CliError::Usage(format!("train-fraction must be in (0, 1], got {f}")))
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn output_sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Reorders series columns to the model's sensor order, or lists the offenders.
fn align_sensors(series: SpeedSeries, ids: &[String]) -> CliResult<SpeedSeries> {
    if series.sensor_ids == ids {
        return Ok(series);
    }
    let missing: Vec<&str> = ids
        .iter()
        .filter(|id| !series.sensor_ids.contains(id))
        .map(String::as_str)
        .collect();
    let extra: Vec<&str> = series
        .sensor_ids
        .iter()
        .filter(|id| !ids.contains(id))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CliError::Usage(format!(
            "sensor ids differ from the model; missing: [{}], unexpected: [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let cols: Vec<usize> = ids
        .iter()
        .map(|id| series.sensor_ids.iter().position(|s| s == id).expect("checked above"))
        .collect();
    let values = (0..series.num_rows())
        .flat_map(|k| {
            let row = series.row(k);
            cols.iter().map(move |&c| row[c])
        })
        .collect();
    Ok(SpeedSeries {
        sensor_ids: ids.to_vec(),
        values,
        ..series
    })
}

fn load_model(path: PathBuf) -> CliResult<TrainedModel> {
    let path = existing(path, "model")?;
    TrainedModel::load(&path).map_err(ctx("model"))
}

fn load_for_model(path: PathBuf, model: &TrainedModel, fill_gaps: bool) -> CliResult<SpeedSeries> {
    let path = existing(path, "speeds")?;
    let opts = LoadOptions {
        interval_minutes: Some(model.interval_minutes),
        fill_gaps,
    };
    let series = load_speeds(&path, opts).map_err(ctx("data_io"))?;
    if series.interval_minutes != model.interval_minutes {
        return Err(CliError::Usage(format!(
            "speeds sampled every {} min, model trained at {} min",
            series.interval_minutes, model.interval_minutes
        )));
    }
    align_sensors(series, &model.sensor_ids)
}

fn cmd_train(a: TrainArgs, cfg: &FileConfig) -> CliResult<()> {
    cfg.check_keys(TRAIN_KEYS)?;
    let speeds = existing(required(cfg.pick(a.speeds, "speeds")?, "speeds")?, "speeds")?;
    let distances = existing(required(cfg.pick(a.distances, "distances")?, "distances")?, "distances")?;
    let model_path: PathBuf = required(cfg.pick(a.model, "model")?, "model")?;
    if model_path == speeds || model_path == distances {
        return Err(CliError::Usage("model output would overwrite an input file".into()));
    }
    let graph_cfg = GraphConfig {
        kappa: cfg.pick(a.kappa, "kappa")?,
        sigma: cfg.pick(a.sigma, "sigma")?,
        epsilon: cfg.pick(a.epsilon, "epsilon")?.unwrap_or(0.01),
        num_periods: cfg.pick(a.periods, "periods")?.unwrap_or(5),
    };
    graph_cfg.validate().map_err(ctx("graph_kernels"))?;
    let defaults = OptimizerConfig::default();
    let optimizer = OptimizerConfig {
        max_iters: cfg.pick(a.max_iters, "max-iters")?.unwrap_or(defaults.max_iters),
        grad_tol: cfg.pick(a.grad_tol, "grad-tol")?.unwrap_or(defaults.grad_tol),
        restarts: cfg.pick(a.restarts, "restarts")?.unwrap_or(defaults.restarts),
        ..defaults
    };
    optimizer
        .validate(graph_cfg.num_periods)
        .map_err(ctx("evidence_inference"))?;
    let mode = match cfg.pick::<String>(a.mode, "mode")? {
        Some(s) => parse_mode(&s)?,
        None => TransitionMode::Map,
    };
    let train_cfg = TrainConfig {
        optimizer,
        wrap: !cfg.switch(a.no_wrap, "no-wrap")?,
        seed: cfg.pick(a.seed, "seed")?.unwrap_or(0),
        mode,
        fixed_hyper: None,
    };
    let fraction = cfg
        .pick(a.train_fraction, "train-fraction")?
        .map(check_fraction)
        .transpose()?;
    let opts = LoadOptions {
        interval_minutes: cfg.pick(a.interval, "interval")?,
        fill_gaps: cfg.switch(a.load.fill_gaps, "fill-gaps")?,
    };

    let start = Instant::now();
    let inputs = load_inputs(&speeds, &distances, opts).map_err(ctx("data_io"))?;
    let tensor = match fraction {
        Some(f) if f < 1.0 => split_days(&inputs.tensor, f).map_err(ctx("data_io"))?.0,
        _ => inputs.tensor,
    };
    let graph = build_graph(&inputs.distances, &graph_cfg).map_err(ctx("graph_kernels"))?;
    let model = train(&tensor, &graph, &graph_cfg, &train_cfg).map_err(ctx("training"))?;
    model.save(&model_path).map_err(ctx("model"))?;

    let stalled: Vec<String> = model
        .slots
        .iter()
        .filter(|s| !s.converged)
        .map(|s| s.t.to_string())
        .collect();
    println!(
        "trained {} slots on {} days, {} sensors, K={}: {}/{} converged, {:.1}s",
        model.slots.len(),
        model.training_days.len(),
        model.num_sensors(),
        model.num_periods(),
        model.slots.len() - stalled.len(),
        model.slots.len(),
        start.elapsed().as_secs_f64()
    );
    if !stalled.is_empty() {
        println!("not converged: slots {}", stalled.join(", "));
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs, cfg: &FileConfig) -> CliResult<()> {
    cfg.check_keys(PREDICT_KEYS)?;
    let model = load_model(required(cfg.pick(a.model, "model")?, "model")?)?;
    let horizons: String = cfg
        .pick(a.horizons, "horizons")?
        .unwrap_or_else(|| default_horizons(model.interval_minutes));
    let steps = parse_horizons(&horizons, model.interval_minutes)?;
    let fill_gaps = cfg.switch(a.load.fill_gaps, "fill-gaps")?;
    let series = load_for_model(required(cfg.pick(a.speeds, "speeds")?, "speeds")?, &model, fill_gaps)?;
    let with_variance = cfg.switch(a.variance, "variance")?;
    let output: Option<PathBuf> = cfg.pick(a.output, "output")?;

    let last = series.num_rows() - 1;
    let now = series.timestamp(last);
    let minute = now.hour() * 60 + now.minute();
    if minute % model.interval_minutes != 0 || now.second() != 0 {
        return Err(CliError::Usage(format!(
            "last timestamp {now} is not on a {}-minute slot boundary",
            model.interval_minutes
        )));
    }
    let slot = (minute / model.interval_minutes) as usize;
    let fc = model
        .forecast(series.row(last), slot, &steps, with_variance)
        .map_err(ctx("forecaster"))?;

    let mut out = output_sink(output.as_deref())?;
    let mut header = vec!["timestamp", "horizon_min", "sensor_id", "prediction"];
    if with_variance {
        header.push("variance");
    }
    let werr = |e: std::io::Error| CliError::Runtime(format!("writing predictions: {e}"));
    writeln!(out, "{}", header.join(",")).map_err(werr)?;
    for (j, &h) in fc.horizons.iter().enumerate() {
        let minutes = h as u32 * model.interval_minutes;
        let at = now + chrono::Duration::minutes(i64::from(minutes));
        let stamp = at.format(TIMESTAMP_FORMAT);
        for (i, id) in model.sensor_ids.iter().enumerate() {
            write!(out, "{stamp},{minutes},{id},{}", fc.mean[j][i]).map_err(werr)?;
            if let Some(v) = &fc.variance {
                write!(out, ",{}", v[j][i]).map_err(werr)?;
            }
            writeln!(out).map_err(werr)?;
        }
    }
    out.flush().map_err(werr)
}

fn cmd_evaluate(a: EvaluateArgs, cfg: &FileConfig) -> CliResult<()> {
    cfg.check_keys(EVALUATE_KEYS)?;
    let model = load_model(required(cfg.pick(a.model, "model")?, "model")?)?;
    let horizons: String = cfg
        .pick(a.horizons, "horizons")?
        .unwrap_or_else(|| default_horizons(model.interval_minutes));
    let steps = parse_horizons(&horizons, model.interval_minutes)?;
    let out_dir: PathBuf = required(cfg.pick(a.output_dir, "output-dir")?, "output-dir")?;
    let baseline_only = cfg.switch(a.baseline_only, "baseline-only")?;
    let fraction = cfg
        .pick(a.train_fraction, "train-fraction")?
        .map(check_fraction)
        .transpose()?;
    let fill_gaps = cfg.switch(a.load.fill_gaps, "fill-gaps")?;
    let series = load_for_model(required(cfg.pick(a.speeds, "speeds")?, "speeds")?, &model, fill_gaps)?;

    let tensor = to_day_tensor(&series).map_err(ctx("data_io"))?;
    let test: DayTensor = match fraction {
        Some(f) if f < 1.0 => split_days(&tensor, f).map_err(ctx("data_io"))?.1,
        Some(_) => return Err(CliError::Usage("train-fraction 1 leaves no test days".into())),
        None => tensor,
    };
    let overlap = test.days.iter().filter(|d| model.training_days.contains(d)).count();
    if overlap > 0 {
        log::warn!("{overlap} of {} test days were also used for training", test.num_days());
    }
    let report = evaluate(&model, &test, &steps, baseline_only).map_err(ctx("evaluation"))?;

    std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let file = |name: &str| out_dir.join(name);
    report
        .write_csv(create(&file("report.csv"))?)
        .map_err(ctx("evaluation"))?;
    report
        .write_json(create(&file("report.json"))?)
        .map_err(ctx("evaluation"))?;
    report
        .write_slot_csv(create(&file("per_slot.csv"))?)
        .map_err(ctx("evaluation"))?;
    if !baseline_only {
        write_diagnostics_csv(&diagnostics(&model), create(&file("diagnostics.csv"))?).map_err(ctx("evaluation"))?;
    }

    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    println!("{} test days", test.num_days());
    println!("horizon_min  model_rmse  baseline_rmse  points");
    for s in &report.horizons {
        println!(
            "{:>11}  {:>10}  {:>13}  {}",
            s.minutes,
            fmt(s.model_rmse),
            fmt(s.baseline_rmse),
            s.count
        );
    }
    Ok(())
}

fn cmd_diagnostics(a: DiagnosticsArgs, cfg: &FileConfig) -> CliResult<()> {
    cfg.check_keys(DIAGNOSTICS_KEYS)?;
    let model = load_model(required(cfg.pick(a.model, "model")?, "model")?)?;
    let output: Option<PathBuf> = cfg.pick(a.output, "output")?;
    write_diagnostics_csv(&diagnostics(&model), output_sink(output.as_deref())?).map_err(ctx("evaluation"))
}

fn cmd_synth(a: SynthArgs, cfg: &FileConfig) -> CliResult<()> {
    cfg.check_keys(SYNTH_KEYS)?;
    let out_dir: PathBuf = required(cfg.pick(a.output_dir, "output-dir")?, "output-dir")?;
    let d = PlantedSpec::default();
    let spec = PlantedSpec {
        num_sensors: cfg.pick(a.sensors, "sensors")?.unwrap_or(d.num_sensors),
        slots_per_day: cfg.pick(a.slots, "slots")?.unwrap_or(d.slots_per_day),
        num_days: cfg.pick(a.days, "days")?.unwrap_or(d.num_days),
        num_periods: cfg.pick(a.periods, "periods")?.unwrap_or(d.num_periods),
        alpha: cfg.pick(a.alpha, "alpha")?.unwrap_or(d.alpha),
        gamma: cfg.pick(a.gamma, "gamma")?.unwrap_or(d.gamma),
        seed: cfg.pick(a.seed, "seed")?.unwrap_or(d.seed),
        ..d
    };
    spec.validate().map_err(ctx("synthetic"))?;
    let syn = generate(&spec).map_err(ctx("synthetic"))?;
    std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    syn.series
        .write_csv(create(&out_dir.join("speeds.csv"))?)
        .map_err(ctx("synthetic"))?;
    syn.distances
        .write_csv(create(&out_dir.join("distances.csv"))?)
        .map_err(ctx("synthetic"))?;
    let truth_path = out_dir.join("truth.json");
    let mut w = create(&truth_path)?;
    serde_json::to_writer_pretty(&mut w, &syn.truth).map_err(|e| CliError::Runtime(format!("truth.json: {e}")))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(&truth_path))?;
    println!(
        "wrote {} days x {} slots for {} sensors to {}",
        spec.num_days,
        spec.slots_per_day,
        spec.num_sensors,
        out_dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cfg.pick(cli.threads, "threads")? {
        if n == 0 {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Train(a) => cmd_train(a, &cfg),
        Command::Predict(a) => cmd_predict(a, &cfg),
        Command::Evaluate(a) => cmd_evaluate(a, &cfg),
        Command::Diagnostics(a) => cmd_diagnostics(a, &cfg),
        Command::Synth(a) => cmd_synth(a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
