//! `driftwatch`: calibrate thresholds, build divergence series, run the
//! detectors, simulate scenarios and score them.

mod output;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use driftwatch::calibration::{
    calibrate, suggested_replications, validate_table, CalibrationSpec, CriticalValueTable, NullDistribution,
    Smoothing,
};
use driftwatch::divergence::{build_series_with, KlDirection, Metric, Reference, SeriesOptions};
use driftwatch::drift_sim::{
    peeking_experiment, synth_divergence_series, ContaminationSchedule, PeekingConfig, ScheduleKind, StreamSpec,
};
use driftwatch::evaluation::{c1_c2_sweep, penalty_curve, score, DetectorAlarms, PenaltyParams, ScoredScenario};
use driftwatch::io::{read_baseline_file, read_features_file, read_json, read_series_file, write_series, GroundTruth};
use driftwatch::{CpmConfig, CpmDetector, DetectionOutcome, ExecPolicy, MwConfig, MwDetector, Statistic};
use output::{manifest_beside, CliError, CliResult, Outputs, EXIT_USAGE};
use serde::{Deserialize, Serialize};

/// Streaming drift detection on divergence series.
#[derive(Debug, Parser)]
#[command(name = "driftwatch", version)]
struct Cli {
    /// Where to write the run manifest (default: beside the first output file).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Monte Carlo critical values h_t for the change point model.
    Calibrate(CalibrateArgs),
    /// Checks a table's per-step conditional alarm rate on fresh null streams.
    Validate(ValidateArgs),
    /// Divergence series from embedding features and a baseline vector.
    Divergence(DivergenceArgs),
    /// Runs a detector on a divergence series (CSV file, or `-` for one value per line on stdin).
    Detect(DetectArgs),
    /// Synthetic divergence series with a contamination schedule.
    Simulate(SimulateArgs),
    /// Scores detector outcomes against ground truth.
    Evaluate(EvaluateArgs),
    /// Repeated testing of nested prefixes without adjustment.
    #[command(alias = "peeking-demo")]
    Peeking(PeekingArgs),
    /// The penalty g for every detection time.
    PenaltyCurve(PenaltyCurveArgs),
    /// Reruns the command recorded in a manifest.
    #[serde(skip)]
    Replay {
        manifest_file: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Mw,
    Cpm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum NullArg {
    Uniform,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KlArg {
    BatchToBaseline,
    BaselineToBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ReferenceArg {
    Baseline,
    PreviousBatch,
}

fn exec(sequential: bool) -> ExecPolicy {
    if sequential {
        ExecPolicy::Sequential
    } else {
        ExecPolicy::Parallel
    }
}

fn resolve_alpha(alpha: f64, arl0: Option<f64>) -> CliResult<f64> {
    match arl0 {
        Some(a) if a > 1.0 => Ok(1.0 / a),
        Some(a) => Err(CliError::Usage(format!("--arl0 must exceed 1, got {a}"))),
        None => Ok(alpha),
    }
}

/// Threshold-table cache: `DRIFTWATCH_TABLE_DIR`, else `./tables`.
fn table_dir() -> PathBuf {
    std::env::var_os("DRIFTWATCH_TABLE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("tables"))
}

/// Cache file name for a detector configuration.
fn table_file_name(statistic: Statistic, alpha: f64, burn_in: usize, min_segment: usize) -> String {
    format!("{statistic}-alpha{alpha}-burnin{burn_in}-seg{min_segment}.json")
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct CalibrateArgs {
    /// mw, cvm, ks or student.
    #[arg(long, default_value = "cvm")]
    statistic: Statistic,
    /// Conditional false-alarm probability per step.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// In-control average run length; overrides --alpha with 1 / arl0.
    #[arg(long)]
    arl0: Option<f64>,
    /// First monitored time step.
    #[arg(long, default_value_t = 25)]
    burn_in: usize,
    #[arg(long, default_value_t = 120)]
    t_max: usize,
    #[arg(long, default_value_t = 2)]
    min_segment: usize,
    /// Null streams (default: enough to keep 100 / alpha alive up to t_max).
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Null distribution (default: uniform for rank statistics, normal for student).
    #[arg(long, value_enum)]
    null: Option<NullArg>,
    /// isotonic or none.
    #[arg(long, default_value = "isotonic")]
    smoothing: Smoothing,
    #[arg(long)]
    sequential: bool,
    /// Table file (default: the cache entry in DRIFTWATCH_TABLE_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the t,h_t,raw_h_t,at_risk curve as CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

fn cmd_calibrate(mut a: CalibrateArgs, out: &mut Outputs) -> CliResult<Command> {
    let alpha = resolve_alpha(a.alpha, a.arl0)?;
    a.alpha = alpha;
    a.arl0 = None;
    let replications = *a
        .replications
        .get_or_insert_with(|| suggested_replications(alpha, a.burn_in, a.t_max));
    let null = *a.null.get_or_insert(match NullDistribution::default_for(a.statistic) {
        NullDistribution::Uniform => NullArg::Uniform,
        NullDistribution::Normal => NullArg::Normal,
    });
    let path = a
        .out
        .get_or_insert_with(|| table_dir().join(table_file_name(a.statistic, alpha, a.burn_in, a.min_segment)))
        .clone();
    let spec = CalibrationSpec {
        t_min: a.burn_in,
        min_segment: a.min_segment,
        null_distribution: match null {
            NullArg::Uniform => NullDistribution::Uniform,
            NullArg::Normal => NullDistribution::Normal,
        },
        smoothing: a.smoothing,
        exec: exec(a.sequential),
        ..CalibrationSpec::new(a.statistic, alpha, a.t_max, replications, a.seed)
    };
    let table = calibrate(&spec)?;
    out.write(&path, table.to_json().as_bytes())?;
    if let Some(curve) = &a.curve {
        out.write(curve, table.to_csv().as_bytes())?;
    }
    Ok(Command::Calibrate(a))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ValidateArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    replications: usize,
    /// Should differ from the calibration seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
    /// Report JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_validate(a: ValidateArgs, out: &mut Outputs) -> CliResult<Command> {
    let table = CriticalValueTable::load(&a.table)?;
    if a.seed == table.seed {
        return Err(CliError::Usage(format!(
            "--seed {} is the table's calibration seed; validation needs fresh streams",
            a.seed
        )));
    }
    let report = validate_table(&table, a.replications, a.seed, exec(a.sequential));
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    out.emit(a.out.as_deref(), text.as_bytes())?;
    Ok(Command::Validate(a))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct DivergenceArgs {
    /// CSV: batch index column, then one column per embedding coordinate.
    #[arg(long)]
    features: PathBuf,
    /// Single-row CSV holding the baseline mean vector.
    #[arg(long)]
    baseline: PathBuf,
    /// kld or cosine.
    #[arg(long, default_value = "kld")]
    metric: Metric,
    #[arg(long, value_enum, default_value = "batch-to-baseline")]
    kl_direction: KlArg,
    #[arg(long, value_enum, default_value = "baseline")]
    reference: ReferenceArg,
    #[arg(long)]
    sequential: bool,
    /// Series CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_divergence(a: DivergenceArgs, out: &mut Outputs) -> CliResult<Command> {
    let batches = read_features_file(&a.features)?;
    let baseline = read_baseline_file(&a.baseline)?;
    let opts = SeriesOptions {
        metric: a.metric,
        kl_direction: match a.kl_direction {
            KlArg::BatchToBaseline => KlDirection::BatchToBaseline,
            KlArg::BaselineToBatch => KlDirection::BaselineToBatch,
        },
        reference: match a.reference {
            ReferenceArg::Baseline => Reference::Baseline,
            ReferenceArg::PreviousBatch => Reference::PreviousBatch,
        },
    };
    let series = build_series_with(&baseline, &batches, &opts, exec(a.sequential))?;
    out.emit(a.out.as_deref(), &series_csv(&series.values))?;
    Ok(Command::Divergence(a))
}

fn series_csv(values: &[f64]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_series(&mut buf, values).expect("writing to memory");
    buf
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct DetectArgs {
    /// Series CSV with t,value columns, or `-` for one value per line on stdin.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "cpm")]
    method: Method,
    /// MW test level, or the CPM per-step conditional alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// CPM only: in-control average run length, overrides --alpha.
    #[arg(long)]
    arl0: Option<f64>,
    /// CPM split statistic: mw, cvm, ks or student.
    #[arg(long, default_value = "cvm")]
    statistic: Statistic,
    #[arg(long, default_value_t = 25)]
    burn_in: usize,
    #[arg(long, default_value_t = 2)]
    min_segment: usize,
    /// CPM threshold table (default: the cache entry in DRIFTWATCH_TABLE_DIR).
    #[arg(long)]
    table: Option<PathBuf>,
    /// MW window size.
    #[arg(long, default_value_t = 40)]
    beta: usize,
    /// MW consecutive rejections per alarm.
    #[arg(long, default_value_t = 1)]
    gamma: usize,
    /// MW: keep sliding after an alarm and report every alarm.
    #[arg(long)]
    multi: bool,
    /// DetectionOutcome JSON (default: stdout, after any streamed steps).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step JSON lines (default: stdout when reading stdin, none otherwise).
    #[arg(long)]
    trace: Option<PathBuf>,
}

enum Detector {
    Mw { det: MwDetector, multi: bool },
    Cpm(Box<CpmDetector>),
}

impl Detector {
    /// One step as a JSON line, and whether to stop reading.
    fn step(&mut self, x: f64) -> driftwatch::Result<(String, bool)> {
        Ok(match self {
            Detector::Mw { det, multi } => {
                let s = det.step(x)?;
                (serde_json::to_string(&s).expect("step serializes"), s.alarmed && !*multi)
            }
            Detector::Cpm(det) => {
                let s = det.step(x)?;
                (serde_json::to_string(&s).expect("step serializes"), s.alarmed)
            }
        })
    }

    fn outcome(&self) -> DetectionOutcome {
        match self {
            Detector::Mw { det, .. } => det.outcome(),
            Detector::Cpm(det) => det.outcome(),
        }
    }
}

fn build_detector(a: &DetectArgs) -> CliResult<Detector> {
    match a.method {
        Method::Mw => {
            let cfg = MwConfig {
                alpha: a.alpha,
                window: a.beta,
                consecutive_required: a.gamma,
            };
            Ok(Detector::Mw {
                det: MwDetector::new(cfg)?,
                multi: a.multi,
            })
        }
        Method::Cpm => {
            let cfg = CpmConfig {
                alpha: resolve_alpha(a.alpha, a.arl0)?,
                burn_in: a.burn_in,
                statistic: a.statistic,
                min_segment: a.min_segment,
            };
            cfg.validate()?;
            let path = a.table.clone().unwrap_or_else(|| {
                table_dir().join(table_file_name(cfg.statistic, cfg.alpha, cfg.burn_in, cfg.min_segment))
            });
            let table = CriticalValueTable::load(&path)?;
            Ok(Detector::Cpm(Box::new(CpmDetector::new(cfg, Arc::new(table))?)))
        }
    }
}

fn cmd_detect(a: DetectArgs, out: &mut Outputs) -> CliResult<Command> {
    let mut det = build_detector(&a)?;
    let streaming = a.input.as_os_str() == "-";
    let mut trace = Vec::new();
    if streaming {
        // Each record goes out as soon as its value arrives.
        let stdin = std::io::stdin().lock();
        let mut stdout = std::io::stdout().lock();
        let echo = a.trace.is_none();
        for (i, line) in stdin.lines().enumerate() {
            let line = line.map_err(|e| CliError::io(Path::new("<stdin>"), e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let x: f64 = line
                .parse()
                .map_err(|_| CliError::data(None, format!("stdin line {}: not a number: '{line}'", i + 1)))?;
            let (record, stop) = det.step(x)?;
            if echo {
                writeln!(stdout, "{record}")
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            } else {
                trace.push(record);
            }
            if stop {
                break;
            }
        }
    } else {
        let series = read_series_file(&a.input)?;
        for &x in &series.values {
            let (record, stop) = det.step(x)?;
            if a.trace.is_some() {
                trace.push(record);
            }
            if stop {
                break;
            }
        }
    }
    let outcome = serde_json::to_string(&det.outcome()).expect("outcome serializes") + "\n";
    out.emit(a.out.as_deref(), outcome.as_bytes())?;
    if let Some(path) = &a.trace {
        let mut text = trace.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        out.write(path, text.as_bytes())?;
    }
    Ok(Command::Detect(a))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SimulateArgs {
    /// step or linear.
    #[arg(long, alias = "kind", default_value = "linear")]
    schedule: ScheduleKind,
    #[arg(long, default_value_t = 120)]
    n_windows: usize,
    #[arg(long, default_value_t = 60)]
    t_start: usize,
    /// End of the linear ramp (ignored for step).
    #[arg(long, default_value_t = 80)]
    t_end: usize,
    /// Mean of the drift distribution N(shift, 1); the null is N(0, 1).
    #[arg(long, default_value_t = 1.0)]
    shift: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives series.csv and truth.json.
    #[arg(long)]
    out_dir: PathBuf,
}

fn cmd_simulate(a: SimulateArgs, out: &mut Outputs) -> CliResult<Command> {
    let sched = ContaminationSchedule::new(a.schedule, a.n_windows, a.t_start, a.t_end)?;
    let spec = StreamSpec {
        batch_size: a.batch_size,
        ..StreamSpec::normal_shift(sched, a.shift, a.seed)
    };
    let sim = synth_divergence_series(&spec)?;
    out.write(&a.out_dir.join("series.csv"), &series_csv(&sim.series.values))?;
    let truth = GroundTruth::from(&sim.schedule);
    let text = serde_json::to_string_pretty(&truth).expect("truth serializes") + "\n";
    out.write(&a.out_dir.join("truth.json"), text.as_bytes())?;
    Ok(Command::Simulate(a))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct EvaluateArgs {
    /// `truth.json,NAME=outcome.json[,NAME=outcome.json...]`; repeat per scenario.
    #[arg(long = "scenario", required = true)]
    scenarios: Vec<String>,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    c1: f64,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    c2: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Score CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the C1/C2 sweep (C1 = -x, C2 = -(1 - x)) as CSV.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long)]
    sequential: bool,
}

fn parse_scenario(spec: &str) -> CliResult<ScoredScenario> {
    let mut parts = spec.split(',');
    let truth_path = PathBuf::from(parts.next().unwrap_or_default());
    let truth: GroundTruth = read_json(&truth_path)?;
    let mut detectors = Vec::new();
    for part in parts {
        let (name, path) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected NAME=outcome.json, got '{part}'")))?;
        let outcome: DetectionOutcome = read_json(Path::new(path))?;
        detectors.push(DetectorAlarms {
            detector: name.to_string(),
            alarm_times: outcome.alarm_times,
        });
    }
    if detectors.is_empty() {
        return Err(CliError::Usage(format!("scenario '{spec}' names no outcome")));
    }
    let name = truth_path
        .parent()
        .and_then(|p| p.file_name())
        .or_else(|| truth_path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(ScoredScenario {
        name,
        t_start: truth.t_start,
        p: truth.p,
        detectors,
    })
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut Outputs) -> CliResult<Command> {
    let params = PenaltyParams {
        c1: a.c1,
        c2: a.c2,
        kappa: a.kappa,
    };
    params.validate()?;
    let scenarios = a.scenarios.iter().map(|s| parse_scenario(s)).collect::<CliResult<Vec<_>>>()?;

    let mut csv = String::from("scenario,detector,detected,delay,false_alarms,loss,theta\n");
    for sc in &scenarios {
        for d in &sc.detectors {
            let s = score(sc.t_start, &d.alarm_times, &sc.p, &params)?;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                sc.name,
                d.detector,
                if s.detected { "yes" } else { "no" },
                s.delay.map_or(String::new(), |v| v.to_string()),
                s.false_alarm_count,
                s.loss,
                s.theta.map_or("UNDEFINED".to_string(), |v| v.to_string()),
            ));
        }
    }
    out.emit(a.out.as_deref(), csv.as_bytes())?;

    if let Some(path) = &a.sweep {
        let res = c1_c2_sweep(&scenarios, a.grid, a.kappa, exec(a.sequential))?;
        let mut text = String::from("c1,c2");
        for d in &res.detectors {
            text.push_str(&format!(",loss_{d}"));
        }
        text.push_str(",best\n");
        for pt in &res.points {
            // + 0.0 turns -0 into 0
            text.push_str(&format!("{},{}", pt.c1 + 0.0, pt.c2 + 0.0));
            for l in &pt.losses {
                text.push_str(&format!(",{l}"));
            }
            text.push_str(&format!(",{}\n", pt.best));
        }
        out.write(path, text.as_bytes())?;
    }
    Ok(Command::Evaluate(a))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct PeekingArgs {
    /// Test levels; repeat for several (default: 0.05 0.01 0.005 0.001).
    #[arg(long)]
    alpha: Vec<f64>,
    /// Replications.
    #[arg(long = "r", alias = "replications", default_value_t = 10_000)]
    r: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    min_prefix: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
    /// alpha,prob_any_rejection,expected_rejections CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_peeking(mut a: PeekingArgs, out: &mut Outputs) -> CliResult<Command> {
    if a.alpha.is_empty() {
        a.alpha = PeekingConfig::default().alphas;
    }
    let rows = peeking_experiment(&PeekingConfig {
        n: a.n,
        replications: a.r,
        alphas: a.alpha.clone(),
        min_prefix: a.min_prefix,
        seed: a.seed,
        exec: exec(a.sequential),
    })?;
    let mut csv = String::from("alpha,prob_any_rejection,expected_rejections\n");
    for row in rows {
        csv.push_str(&format!("{},{},{}\n", row.alpha, row.prob_any_rejection, row.expected_rejections));
    }
    out.emit(a.out.as_deref(), csv.as_bytes())?;
    Ok(Command::Peeking(a))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct PenaltyCurveArgs {
    #[arg(long, default_value = "linear")]
    schedule: ScheduleKind,
    #[arg(long, default_value_t = 120)]
    n_windows: usize,
    #[arg(long, default_value_t = 60)]
    t_start: usize,
    #[arg(long, default_value_t = 80)]
    t_end: usize,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    c1: f64,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    c2: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// t_d,g CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_penalty_curve(a: PenaltyCurveArgs, out: &mut Outputs) -> CliResult<Command> {
    let sched = ContaminationSchedule::new(a.schedule, a.n_windows, a.t_start, a.t_end)?;
    let params = PenaltyParams {
        c1: a.c1,
        c2: a.c2,
        kappa: a.kappa,
    };
    let curve = penalty_curve(sched.t_start, sched.n_windows, &sched.p, &params)?;
    let mut csv = String::from("t_d,g\n");
    for (t, g) in curve {
        csv.push_str(&format!("{t},{g}\n"));
    }
    out.emit(a.out.as_deref(), csv.as_bytes())?;
    Ok(Command::PenaltyCurve(a))
}

fn dispatch(command: Command, out: &mut Outputs) -> CliResult<Command> {
    match command {
        Command::Calibrate(a) => cmd_calibrate(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Divergence(a) => cmd_divergence(a, out),
        Command::Detect(a) => cmd_detect(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Peeking(a) => cmd_peeking(a, out),
        Command::PenaltyCurve(a) => cmd_penalty_curve(a, out),
        Command::Replay { manifest_file } => {
            #[derive(Deserialize)]
            struct Recorded {
                command: Command,
            }
            let rec: Recorded = read_json(&manifest_file)?;
            dispatch(rec.command, out)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut out = Outputs::default();
    let resolved = dispatch(cli.command, &mut out)?;
    let manifest = cli.manifest.or_else(|| match &resolved {
        Command::Simulate(a) => Some(a.out_dir.join("manifest.json")),
        _ => out.first().map(manifest_beside),
    });
    if let Some(path) = manifest {
        out.write_manifest(&path, &resolved)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let err = CliError::Usage(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
