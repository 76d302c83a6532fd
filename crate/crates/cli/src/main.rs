//! Command-line surface for the correlation-detection laboratory.
//!
//! Subcommands: simulate, calibrate, sweep, lower-bound, oracle, rgg.
//! Every parameter can come from a TOML config file (--config); flags
//! override file values.  Output is CSV (default) or JSON, with the
//! tool version, a config echo, and the master seed embedded in the
//! header so each run is reconstructible.  Exit codes: 0 success,
//! 2 usage/config error, 3 runtime error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use corrdet::bayes::bayes_risk_estimate;
use corrdet::harness::{
    calibrate_threshold, estimate_risk_with_mode, sweep, AlternativeMode, Detector, RiskEstimate,
    SweepAxis, ThresholdPolicy,
};
use corrdet::detectors::Threshold;
use corrdet::lower_bound::{theorem1_bound_with_mode, BlockMomentMode};
use corrdet::rgg::{c2, median_clique_experiment, theorem2_bound, C1};
use corrdet::{ClassKind, Error, ModelSpec};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "corrdet", version, about = "Sparse positive-correlation detection experiments")]
struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file path (default: <command>.<ext> in $CORRDET_OUT_DIR or the
    /// current directory; "-" writes to standard output)
    #[arg(long, global = true)]
    output: Option<String>,
    /// Output format
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Worker thread count (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Deserialize, Serialize, Clone)]
struct ModelArgs {
    /// Correlation class: block, block-nowrap, clique, matching
    #[arg(long)]
    class: Option<String>,
    /// Ambient dimension
    #[arg(long)]
    n: Option<usize>,
    /// Sample size (rows)
    #[arg(long)]
    m: Option<usize>,
    /// Anomalous-set size
    #[arg(long)]
    k: Option<usize>,
    /// Correlation level in [0, 0.95]
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args, Debug, Default, Deserialize, Serialize, Clone)]
struct DetectorArgs {
    /// squared-sum, localized-squared-sum, max-correlation, max-sum
    #[arg(long)]
    detector: Option<String>,
    /// Row count ell for max-sum
    #[arg(long)]
    ell: Option<usize>,
    /// Enumeration budget for scan-type statistics
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args, Debug, Default, Deserialize, Serialize, Clone)]
struct ThresholdArgs {
    /// analytic, calibrated, fixed
    #[arg(long)]
    threshold: Option<String>,
    /// Significance level for calibrated thresholds
    #[arg(long)]
    level: Option<f64>,
    /// Null trials used for calibration
    #[arg(long)]
    calibration_trials: Option<usize>,
    /// Threshold value when --threshold fixed
    #[arg(long)]
    threshold_value: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo risk estimate of one detector at one parameter point
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        det: DetectorArgs,
        #[command(flatten)]
        thr: ThresholdArgs,
        /// Trials per side (null and alternative)
        #[arg(long)]
        trials: Option<usize>,
        /// Master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Alternative mode: uniform or fixed-first
        #[arg(long)]
        alt_mode: Option<String>,
    },
    /// Empirical null quantile of a detector statistic
    Calibrate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        det: DetectorArgs,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Risk estimates along a parameter grid
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        det: DetectorArgs,
        #[command(flatten)]
        thr: ThresholdArgs,
        /// Swept parameter: rho, m, k, n
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated strictly increasing grid values
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Minimax lower bound on the risk
    LowerBound {
        #[command(flatten)]
        model: ModelArgs,
        /// Fixed chi-square radius a (default: optimized over a >= sqrt 8)
        #[arg(long)]
        a: Option<f64>,
        /// Comma-separated rho grid (overrides --rho)
        #[arg(long)]
        rho_grid: Option<String>,
        /// Block moment mode: exact or ztilde
        #[arg(long)]
        block_mode: Option<String>,
    },
    /// Exact likelihood-ratio (Bayes) risk for tiny classes
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Class enumeration cap
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Median clique number of random geometric graphs on the sphere
    Rgg {
        /// Vertex count
        #[arg(long)]
        n: Option<usize>,
        /// Sphere dimension
        #[arg(long)]
        d: Option<usize>,
        /// Edge probability
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-graph clique search budget in seconds (0 disables)
        #[arg(long)]
        clique_budget_secs: Option<f64>,
        /// Keep replicates whose clique search was truncated
        #[arg(long)]
        allow_inexact: bool,
    },
}

/// Flat optional mirror of every flag, for the TOML config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    output: Option<String>,
    format: Option<String>,
    workers: Option<usize>,
    class: Option<String>,
    n: Option<usize>,
    m: Option<usize>,
    k: Option<usize>,
    rho: Option<f64>,
    detector: Option<String>,
    ell: Option<usize>,
    budget: Option<usize>,
    threshold: Option<String>,
    level: Option<f64>,
    calibration_trials: Option<usize>,
    threshold_value: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    alt_mode: Option<String>,
    axis: Option<String>,
    grid: Option<String>,
    a: Option<f64>,
    rho_grid: Option<String>,
    block_mode: Option<String>,
    cap: Option<usize>,
    d: Option<usize>,
    p: Option<f64>,
    replicates: Option<usize>,
    clique_budget_secs: Option<f64>,
    allow_inexact: Option<bool>,
}

/// Config-level failures exit 2, runtime failures exit 3.
enum CliError {
    Config(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_) | Error::Domain(_) | Error::BudgetExceeded(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    if let Some(w) = cli.workers.or(file.workers) {
        if w == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let format = cli
        .format
        .clone()
        .or_else(|| file.format.clone())
        .unwrap_or_else(|| "csv".into());
    let output = cli.output.clone().or_else(|| file.output.clone());

    let (name, config_echo, columns, rows, master_seed) = dispatch(&cli.command, &file)?;
    let path = resolve_output(output, name, &format);
    write_output(&path, &format, &config_echo, master_seed, &columns, &rows)?;
    if let Some(p) = &path {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

type CommandOutput = (
    &'static str,       // subcommand name, used for the default file name
    Value,              // config echo
    Vec<&'static str>,  // column order
    Vec<Vec<Value>>,    // data rows
    u64,                // master seed
);

fn dispatch(command: &Command, file: &FileConfig) -> Result<CommandOutput, CliError> {
    match command {
        Command::Simulate { model, det, thr, trials, seed, alt_mode } => {
            run_simulate(model, det, thr, *trials, *seed, alt_mode.clone(), file)
        }
        Command::Calibrate { model, det, level, trials, seed } => {
            run_calibrate(model, det, *level, *trials, *seed, file)
        }
        Command::Sweep { model, det, thr, axis, grid, trials, seed } => {
            run_sweep(model, det, thr, axis.clone(), grid.clone(), *trials, *seed, file)
        }
        Command::LowerBound { model, a, rho_grid, block_mode } => {
            run_lower_bound(model, *a, rho_grid.clone(), block_mode.clone(), file)
        }
        Command::Oracle { model, trials, seed, cap } => {
            run_oracle(model, *trials, *seed, *cap, file)
        }
        Command::Rgg { n, d, p, replicates, seed, clique_budget_secs, allow_inexact } => {
            run_rgg(*n, *d, *p, *replicates, *seed, *clique_budget_secs, *allow_inexact, file)
        }
    }
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required parameter --{flag}")))
}

fn parse_class(s: &str) -> Result<ClassKind, CliError> {
    ClassKind::parse(s).map_err(CliError::from)
}

fn build_spec(model: &ModelArgs, file: &FileConfig) -> Result<ModelSpec, CliError> {
    let class = parse_class(&require(
        model.class.clone().or_else(|| file.class.clone()),
        "class",
    )?)?;
    let k = require(model.k.or(file.k), "k")?;
    // Matching fixes n = k^2, so accept an omitted n there
    let n = match model.n.or(file.n) {
        Some(n) => n,
        None if class == ClassKind::Matching => k * k,
        None => return Err(CliError::Config("missing required parameter --n".into())),
    };
    let m = require(model.m.or(file.m), "m")?;
    let rho = require(model.rho.or(file.rho), "rho")?;
    ModelSpec::new(class, n, m, k, rho).map_err(CliError::from)
}

fn build_detector(det: &DetectorArgs, file: &FileConfig) -> Result<Detector, CliError> {
    let name = require(det.detector.clone().or_else(|| file.detector.clone()), "detector")?;
    let budget = det.budget.or(file.budget).unwrap_or(1_000_000);
    let ell = det.ell.or(file.ell).unwrap_or(1);
    match name.as_str() {
        "squared-sum" => Ok(Detector::SquaredSum),
        "localized-squared-sum" => Ok(Detector::LocalizedSquaredSum { budget }),
        "max-correlation" => Ok(Detector::MaxCorrelation),
        "max-sum" => Ok(Detector::MaxSum { ell, budget }),
        other => Err(CliError::Config(format!("unknown detector '{other}'"))),
    }
}

fn build_policy(
    thr: &ThresholdArgs,
    file: &FileConfig,
) -> Result<ThresholdPolicy, CliError> {
    let kind = thr
        .threshold
        .clone()
        .or_else(|| file.threshold.clone())
        .unwrap_or_else(|| "analytic".into());
    match kind.as_str() {
        "analytic" => Ok(ThresholdPolicy::Analytic),
        "calibrated" => {
            let level = thr.level.or(file.level).unwrap_or(0.05);
            let trials = thr
                .calibration_trials
                .or(file.calibration_trials)
                .unwrap_or_else(|| ((100.0 / level).ceil() as usize).max(10_000));
            Ok(ThresholdPolicy::Calibrated { level, trials })
        }
        "fixed" => {
            let value = require(
                thr.threshold_value.or(file.threshold_value),
                "threshold-value",
            )?;
            Ok(ThresholdPolicy::Fixed(value))
        }
        other => Err(CliError::Config(format!("unknown threshold policy '{other}'"))),
    }
}

fn threshold_for(
    spec: &ModelSpec,
    detector: Detector,
    policy: ThresholdPolicy,
    seed: u64,
) -> Result<Threshold, CliError> {
    use corrdet::detectors::{ThresholdInputs, ThresholdKind};
    Ok(match policy {
        ThresholdPolicy::Analytic => detector.analytic_threshold(spec)?,
        ThresholdPolicy::Calibrated { level, trials } => {
            calibrate_threshold(spec, detector, level, trials, seed)?
        }
        ThresholdPolicy::Fixed(value) => Threshold {
            test_name: detector.stat_name(),
            value,
            kind: ThresholdKind::Analytic,
            inputs: ThresholdInputs::default(),
        },
    })
}

fn parse_alt_mode(s: &str) -> Result<AlternativeMode, CliError> {
    match s {
        "uniform" => Ok(AlternativeMode::UniformRandom),
        "fixed-first" => Ok(AlternativeMode::FixedFirst),
        other => Err(CliError::Config(format!("unknown alt mode '{other}'"))),
    }
}

const RISK_COLUMNS: [&str; 13] = [
    "class", "n", "m", "k", "rho", "detector", "threshold_kind", "threshold", "type1", "type2",
    "risk", "half_width_95", "trials_per_side",
];

fn risk_row(est: &RiskEstimate, thr: Option<&Threshold>) -> Vec<Value> {
    vec![
        json!(est.spec.class_kind.name()),
        json!(est.spec.n),
        json!(est.spec.m),
        json!(est.spec.k),
        json!(est.spec.rho),
        json!(est.detector),
        match thr {
            Some(t) => json!(format!("{:?}", t.kind).to_lowercase()),
            None => json!("exact-lr"),
        },
        match thr {
            Some(t) => json!(t.value),
            None => Value::Null,
        },
        json!(est.type1),
        json!(est.type2),
        json!(est.risk),
        json!(est.half_width_95),
        json!(est.trials_per_side),
    ]
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    model: &ModelArgs,
    det: &DetectorArgs,
    thr: &ThresholdArgs,
    trials: Option<usize>,
    seed: Option<u64>,
    alt_mode: Option<String>,
    file: &FileConfig,
) -> Result<CommandOutput, CliError> {
    let spec = build_spec(model, file)?;
    let detector = build_detector(det, file)?;
    let policy = build_policy(thr, file)?;
    let trials = trials.or(file.trials).unwrap_or(1000);
    let seed = seed.or(file.seed).unwrap_or(0);
    let mode = parse_alt_mode(
        &alt_mode.or_else(|| file.alt_mode.clone()).unwrap_or_else(|| "uniform".into()),
    )?;
    let threshold = threshold_for(&spec, detector, policy, seed)?;
    let est = estimate_risk_with_mode(&spec, detector, &threshold, trials, seed, mode)?;
    let config = json!({
        "command": "simulate",
        "spec": spec,
        "detector": detector,
        "policy": policy,
        "trials": trials,
        "seed": seed,
        "alt_mode": mode,
    });
    Ok((
        "simulate",
        config,
        RISK_COLUMNS.to_vec(),
        vec![risk_row(&est, Some(&threshold))],
        seed,
    ))
}

fn run_calibrate(
    model: &ModelArgs,
    det: &DetectorArgs,
    level: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    file: &FileConfig,
) -> Result<CommandOutput, CliError> {
    let spec = build_spec(model, file)?;
    let detector = build_detector(det, file)?;
    let level = level.or(file.level).unwrap_or(0.05);
    let trials = trials
        .or(file.trials)
        .unwrap_or_else(|| ((100.0 / level).ceil() as usize).max(10_000));
    let seed = seed.or(file.seed).unwrap_or(0);
    let thr = calibrate_threshold(&spec, detector, level, trials, seed)?;
    let config = json!({
        "command": "calibrate",
        "spec": spec,
        "detector": detector,
        "level": level,
        "trials": trials,
        "seed": seed,
    });
    let columns = vec![
        "class", "n", "m", "k", "detector", "level", "calibration_trials", "threshold",
    ];
    let row = vec![
        json!(spec.class_kind.name()),
        json!(spec.n),
        json!(spec.m),
        json!(spec.k),
        json!(detector.name()),
        json!(level),
        json!(trials),
        json!(thr.value),
    ];
    Ok(("calibrate", config, columns, vec![row], seed))
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("grid value '{tok}': {e}")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    model: &ModelArgs,
    det: &DetectorArgs,
    thr: &ThresholdArgs,
    axis: Option<String>,
    grid: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    file: &FileConfig,
) -> Result<CommandOutput, CliError> {
    let spec = build_spec(model, file)?;
    let detector = build_detector(det, file)?;
    let policy = build_policy(thr, file)?;
    let axis = SweepAxis::parse(&require(axis.or_else(|| file.axis.clone()), "axis")?)?;
    let grid = parse_grid(&require(grid.or_else(|| file.grid.clone()), "grid")?)?;
    let trials = trials.or(file.trials).unwrap_or(1000);
    let seed = seed.or(file.seed).unwrap_or(0);
    let result = sweep(&spec, detector, axis, &grid, policy, trials, seed)?;
    let config = json!({
        "command": "sweep",
        "spec": spec,
        "detector": detector,
        "policy": policy,
        "axis": axis,
        "grid": grid,
        "trials": trials,
        "seed": seed,
    });
    let mut columns = vec!["axis", "value"];
    columns.extend(RISK_COLUMNS);
    let rows = result
        .rows
        .iter()
        .map(|(v, t, est)| {
            let mut row = vec![json!(axis.name()), json!(v)];
            row.extend(risk_row(est, Some(t)));
            row
        })
        .collect();
    Ok(("sweep", config, columns, rows, seed))
}

fn run_lower_bound(
    model: &ModelArgs,
    a: Option<f64>,
    rho_grid: Option<String>,
    block_mode: Option<String>,
    file: &FileConfig,
) -> Result<CommandOutput, CliError> {
    let rho_grid = rho_grid.or_else(|| file.rho_grid.clone());
    let mut base = model.clone();
    if base.rho.or(file.rho).is_none() && rho_grid.is_some() {
        base.rho = Some(0.0); // placeholder; overwritten per grid point
    }
    let spec = build_spec(&base, file)?;
    let a = a.or(file.a);
    let mode = match block_mode
        .or_else(|| file.block_mode.clone())
        .unwrap_or_else(|| "exact".into())
        .as_str()
    {
        "exact" => BlockMomentMode::ExactPmf,
        "ztilde" => BlockMomentMode::ZTilde,
        other => return Err(CliError::Config(format!("unknown block mode '{other}'"))),
    };
    let rhos = match &rho_grid {
        Some(g) => parse_grid(g)?,
        None => vec![spec.rho],
    };
    let mut rows = Vec::with_capacity(rhos.len());
    for &rho in &rhos {
        let mut point = spec;
        point.rho = rho;
        let r = theorem1_bound_with_mode(&point, a, mode)?;
        rows.push(vec![
            json!(point.class_kind.name()),
            json!(r.n),
            json!(r.m),
            json!(r.k),
            json!(r.rho),
            json!(r.a_used),
            json!(r.chi_factor),
            json!(r.moment_term),
            json!(r.bound),
        ]);
    }
    let config = json!({
        "command": "lower-bound",
        "spec": spec,
        "a": a,
        "rho_grid": rhos,
        "block_mode": match mode { BlockMomentMode::ExactPmf => "exact", BlockMomentMode::ZTilde => "ztilde" },
    });
    let columns = vec![
        "class", "n", "m", "k", "rho", "a_used", "chi_factor", "moment_term", "bound",
    ];
    Ok(("lower-bound", config, columns, rows, 0))
}

fn run_oracle(
    model: &ModelArgs,
    trials: Option<usize>,
    seed: Option<u64>,
    cap: Option<usize>,
    file: &FileConfig,
) -> Result<CommandOutput, CliError> {
    let spec = build_spec(model, file)?;
    let trials = trials.or(file.trials).unwrap_or(1000);
    let seed = seed.or(file.seed).unwrap_or(0);
    let cap = cap.or(file.cap).unwrap_or(100_000);
    let est = bayes_risk_estimate(&spec, trials, seed, cap)?;
    let config = json!({
        "command": "oracle",
        "spec": spec,
        "trials": trials,
        "seed": seed,
        "cap": cap,
    });
    Ok((
        "oracle",
        config,
        RISK_COLUMNS.to_vec(),
        vec![risk_row(&est, None)],
        seed,
    ))
}

#[allow(clippy::too_many_arguments)]
fn run_rgg(
    n: Option<usize>,
    d: Option<usize>,
    p: Option<f64>,
    replicates: Option<usize>,
    seed: Option<u64>,
    clique_budget_secs: Option<f64>,
    allow_inexact: bool,
    file: &FileConfig,
) -> Result<CommandOutput, CliError> {
    let n = require(n.or(file.n), "n")?;
    let d = require(d.or(file.d), "d")?;
    let p = p.or(file.p).unwrap_or(0.5);
    let replicates = replicates.or(file.replicates).unwrap_or(31);
    let seed = seed.or(file.seed).unwrap_or(0);
    let budget_secs = clique_budget_secs.or(file.clique_budget_secs).unwrap_or(10.0);
    let allow_inexact = allow_inexact || file.allow_inexact.unwrap_or(false);
    let budget = if budget_secs > 0.0 {
        Some(Duration::from_secs_f64(budget_secs))
    } else {
        None
    };
    let result = median_clique_experiment(n, d, p, replicates, seed, budget, allow_inexact)?;
    // the median bound only applies past its dimension precondition
    let bound = if (d as f64) >= C1 * (c2() * n as f64).ln() {
        theorem2_bound(n, d).ok()
    } else {
        None
    };
    let config = json!({
        "command": "rgg",
        "n": n,
        "d": d,
        "p": p,
        "replicates": replicates,
        "seed": seed,
        "clique_budget_secs": budget_secs,
        "allow_inexact": allow_inexact,
    });
    let columns = vec![
        "n", "d", "p", "replicate", "omega", "exact", "median", "q1", "q3",
        "inexact_replicates", "median_lower_bound",
    ];
    // per-replicate rows; the summary statistics repeat in each row
    let rows = result
        .omegas
        .iter()
        .enumerate()
        .map(|(i, &omega)| {
            vec![
                json!(n),
                json!(d),
                json!(p),
                json!(i),
                json!(omega),
                json!(true),
                json!(result.median),
                json!(result.q1),
                json!(result.q3),
                json!(result.inexact_replicates),
                bound.map(|b| json!(b)).unwrap_or(Value::Null),
            ]
        })
        .collect();
    Ok(("rgg", config, columns, rows, seed))
}

fn resolve_output(output: Option<String>, name: &str, format: &str) -> Option<PathBuf> {
    match output.as_deref() {
        Some("-") => None,
        Some(p) => Some(PathBuf::from(p)),
        None => {
            let dir = std::env::var("CORRDET_OUT_DIR").unwrap_or_else(|_| ".".into());
            Some(PathBuf::from(dir).join(format!("{name}.{format}")))
        }
    }
}

fn format_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.to_string()
            } else if let Some(u) = n.as_u64() {
                u.to_string()
            } else {
                // 17 significant digits: bit-faithful f64 round trip
                format!("{:.16e}", n.as_f64().expect("numeric cell"))
            }
        }
        other => other.to_string(),
    }
}

fn write_output(
    path: &Option<PathBuf>,
    format: &str,
    config_echo: &Value,
    master_seed: u64,
    columns: &[&'static str],
    rows: &[Vec<Value>],
) -> Result<(), CliError> {
    let payload = match format {
        "csv" => {
            let mut out = String::new();
            writeln!(out, "# tool: corrdet {TOOL_VERSION}").unwrap();
            writeln!(out, "# config: {config_echo}").unwrap();
            writeln!(out, "# master_seed: {master_seed}").unwrap();
            writeln!(out, "{}", columns.join(",")).unwrap();
            for row in rows {
                let cells: Vec<String> = row.iter().map(format_cell).collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
            out
        }
        "json" => {
            let records: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let mut obj = Map::new();
                    for (c, v) in columns.iter().zip(row) {
                        obj.insert((*c).to_string(), v.clone());
                    }
                    Value::Object(obj)
                })
                .collect();
            let doc = json!({
                "tool_version": TOOL_VERSION,
                "config": config_echo,
                "master_seed": master_seed,
                "columns": columns,
                "rows": records,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("serializable document");
            s.push('\n');
            s
        }
        other => return Err(CliError::Config(format!("unknown format '{other}'"))),
    };
    match path {
        Some(p) => std::fs::write(p, payload)?,
        None => print!("{payload}"),
    }
    Ok(())
}
