//! `pricehedge`: runs storage hedging experiments and writes plot-ready CSVs.
//!
//! Exit codes: 0 on success, 2 when arguments or the scenario do not parse or
//! validate, 3 when a dispatch problem is infeasible, 1 for anything else.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use pricehedge::lp::LpError;
use pricehedge::market::{compute_flex_required, MarketError};
use pricehedge::mpc::{self, MpcError};
use pricehedge::report::{self, QuantifyRow, Summary, SweepRow, RECONSTRUCTION_LABEL};
use pricehedge::scenario::{self, CalibrationTargets, ScenarioError, Strictness};
use pricehedge::{Scenario, Trajectory};

#[derive(Debug, Parser)]
#[command(name = "pricehedge", version, about = "Price-cap hedging with storage under receding-horizon control")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Baseline plus one receding-horizon run per lookahead; writes trajectories and a savings summary.
    Run(RunArgs),
    /// Per-hour flexibility needed to hold the cap, ignoring storage limits.
    Quantify(QuantifyArgs),
    /// Repeats a run over a grid of one parameter, in parallel.
    Sweep(SweepArgs),
    /// Loads and checks a scenario, including a feasible baseline dispatch.
    Validate(ScenarioArgs),
    /// Writes a seeded APX-like scenario calibrated to the target hours.
    Synthesize(SynthArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// `bundled`, a `scenario.toml`, or a directory holding one.
    #[arg(long)]
    scenario: Option<String>,
    /// Treat soft modelling assumptions as errors.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Cap in €/MWh applied to every hour.
    #[arg(long)]
    pi_des: Option<f64>,
    /// MWh.
    #[arg(long)]
    ess_capacity: Option<f64>,
    /// Fraction of capacity in [0, 1].
    #[arg(long)]
    ess_initial_soc: Option<f64>,
    /// MW.
    #[arg(long)]
    ess_power: Option<f64>,
    /// MWh lost per hour.
    #[arg(long)]
    ess_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Emit {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_delimiter = ',', default_value = "1,6,8")]
    horizons: Vec<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Format of the savings summary.
    #[arg(long, value_enum, default_value = "json")]
    emit: Emit,
}

#[derive(Debug, Args)]
struct QuantifyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    pi_des: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Parameter {
    EssCapacity,
    Horizon,
    PiDes,
}

impl Parameter {
    fn name(self) -> &'static str {
        match self {
            Parameter::EssCapacity => "ess-capacity",
            Parameter::Horizon => "horizon",
            Parameter::PiDes => "pi-des",
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_enum)]
    parameter: Parameter,
    /// Grid points, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Lookahead for sweeps over other parameters.
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = scenario::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 75.0)]
    pi_des: f64,
    /// One-based hours whose uncapped price must exceed the cap.
    #[arg(long, value_delimiter = ',', default_value = "9,10,11,12,13,18,19,20")]
    exceed_hours: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Bad arguments that clap cannot catch on its own.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<ScenarioError>() {
            return 2;
        }
        if let Some(MpcError::Infeasible { .. }) = cause.downcast_ref::<MpcError>() {
            return 3;
        }
        if let Some(MarketError::Solver(LpError::Infeasible)) = cause.downcast_ref::<MarketError>() {
            return 3;
        }
    }
    1
}

fn load(args: &ScenarioArgs) -> Result<(Scenario, Strictness)> {
    let strictness = if args.strict { Strictness::Strict } else { Strictness::Lenient };
    let source = scenario::resolve_source(args.scenario.as_deref());
    let s = source.load(strictness)?;
    log::info!("loaded scenario `{}` ({} hours)", s.name, s.horizon());
    Ok((s, strictness))
}

fn apply_overrides(mut s: Scenario, o: &Overrides, strictness: Strictness) -> Result<Scenario> {
    if let Some(p) = o.pi_des {
        s = s.with_pi_des(p);
    }
    let touches_storage = o.ess_capacity.is_some() || o.ess_initial_soc.is_some() || o.ess_power.is_some() || o.ess_loss.is_some();
    if touches_storage {
        let Some(spec) = s.storage.first_mut() else {
            return Err(usage("storage overrides given but the scenario defines no storage"));
        };
        if let Some(v) = o.ess_capacity {
            spec.capacity = v;
        }
        if let Some(v) = o.ess_initial_soc {
            spec.initial_soc = v;
        }
        if let Some(v) = o.ess_power {
            spec.power_bound = v;
        }
        if let Some(v) = o.ess_loss {
            spec.loss = v;
        }
    }
    for w in s.validate(strictness)? {
        eprintln!("warning: {w}");
    }
    Ok(s)
}

fn label(s: &Scenario) -> String {
    format!("{RECONSTRUCTION_LABEL}: {}", s.name)
}

fn caps(s: &Scenario) -> Vec<f64> {
    s.hours.iter().map(|h| h.pi_des).collect()
}

fn storage_of(s: &Scenario) -> Result<&pricehedge::StorageSpec> {
    if s.storage.len() > 1 {
        log::warn!("scenario defines {} storage devices; only the first is operated", s.storage.len());
    }
    s.storage
        .first()
        .ok_or_else(|| usage("scenario defines no storage device to operate"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    report::write_atomic(path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    if args.horizons.is_empty() || args.horizons.contains(&0) {
        return Err(usage("--horizons needs one or more lookaheads of at least 1"));
    }
    let (s, strictness) = load(&args.scenario)?;
    let s = apply_overrides(s, &args.overrides, strictness)?;
    let spec = storage_of(&s)?.clone();

    let baseline = mpc::run_baseline(&s).context("baseline run")?;
    let runs = args
        .horizons
        .par_iter()
        .map(|&h| mpc::run_receding(&s, &spec, h).with_context(|| format!("run with H={h}")).map(|t| (h, t)))
        .collect::<Result<BTreeMap<usize, Trajectory>>>()?;
    let report = mpc::savings(&runs, &baseline)?;

    write(&args.out.join("baseline.csv"), &report::trajectory_csv(&baseline)?)?;
    for (h, t) in &runs {
        write(&args.out.join(format!("trajectory_h{h}.csv")), &report::trajectory_csv(t)?)?;
    }
    let traj_refs: Vec<&Trajectory> = runs.values().collect();
    let summary = Summary::new(&s.name, &label(&s), &report, &baseline, &traj_refs, &caps(&s));
    match args.emit {
        Emit::Json => write(&args.out.join("summary.json"), &summary.to_json())?,
        Emit::Csv => write(&args.out.join("summary.csv"), &summary.to_csv()?)?,
    }

    println!("{} — €/MWh at the load bus ({})", s.name, RECONSTRUCTION_LABEL);
    println!("{:>8} {:>12} {:>12} {:>14} {:>10}", "run", "cost/MWh", "saving", "gain vs H=1", "capped>π");
    println!(
        "{:>8} {:>12.4} {:>12} {:>14} {:>10}",
        "baseline",
        summary.baseline_cost_per_mwh,
        "-",
        "-",
        summary.baseline_cap_violated_hours.len()
    );
    for h in &summary.horizons {
        let gain = match (h.forecast_gain, h.forecast_gain_percent) {
            (Some(g), Some(p)) => format!("{g:.4} ({p:.1}%)"),
            (Some(g), None) => format!("{g:.4}"),
            _ => "-".into(),
        };
        println!(
            "{:>8} {:>12.4} {:>12.4} {:>14} {:>10}",
            format!("H={}", h.horizon),
            h.cost_per_mwh,
            h.saving_vs_baseline,
            gain,
            h.cap_violated_hours.len()
        );
    }
    Ok(())
}

fn cmd_quantify(args: &QuantifyArgs) -> Result<()> {
    let (s, strictness) = load(&args.scenario)?;
    let overrides = Overrides {
        pi_des: args.pi_des,
        ess_capacity: None,
        ess_initial_soc: None,
        ess_power: None,
        ess_loss: None,
    };
    let s = apply_overrides(s, &overrides, strictness)?;
    let uncapped = scenario::uncapped_lmp(&s)?;
    let constrained = s.price_constrained_buses();
    let mut rows = Vec::with_capacity(s.horizon());
    for t in 0..s.horizon() {
        let r = compute_flex_required(&s.network, &s.dispatch_inputs(t)).with_context(|| format!("hour {}", t + 1))?;
        rows.push(QuantifyRow {
            hour: t + 1,
            pi_des: s.hours[t].pi_des,
            lmp_uncapped: uncapped[t],
            lmp_capped: r.lmp[&s.load_bus],
            flex_required: constrained
                .iter()
                .map(|b| (b.clone(), r.flex_required.get(b).copied().unwrap_or(0.0)))
                .collect(),
        });
    }
    let text = report::quantify_csv(&rows)?;
    match &args.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sweep_point(s: &Scenario, args: &SweepArgs, value: f64, baseline_cost: f64) -> Result<(SweepRow, String)> {
    let mut s = s.clone();
    let mut horizon = args.horizon;
    match args.parameter {
        Parameter::EssCapacity => {
            let spec = s.storage.first_mut().ok_or_else(|| usage("scenario defines no storage device"))?;
            spec.capacity = value;
        }
        Parameter::PiDes => s = s.with_pi_des(value),
        Parameter::Horizon => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(usage(format!("horizon grid value {value} is not a positive integer")));
            }
            horizon = value as usize;
        }
    }
    s.validate(Strictness::Lenient)?;
    let spec = storage_of(&s)?.clone();
    let traj = mpc::run_receding(&s, &spec, horizon).with_context(|| format!("{} = {value}", args.parameter.name()))?;
    let row = SweepRow {
        parameter: args.parameter.name().to_string(),
        value,
        horizon,
        total_cost: traj.total_cost(),
        cost_per_mwh: traj.cost_per_mwh(),
        saving_vs_baseline: baseline_cost - traj.cost_per_mwh(),
        cap_violated_hours: traj.hours_above(&caps(&s), report::CAP_TOLERANCE).len(),
    };
    Ok((row, report::trajectory_csv(&traj)?))
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    if args.values.is_empty() {
        return Err(usage("--values needs at least one grid point"));
    }
    if args.horizon == 0 {
        return Err(usage("--horizon must be at least 1"));
    }
    let (s, strictness) = load(&args.scenario)?;
    let s = apply_overrides(s, &args.overrides, strictness)?;
    let baseline = mpc::run_baseline(&s).context("baseline run")?;
    let baseline_cost = baseline.cost_per_mwh();
    let name = args.parameter.name();
    let dir = args.out.join(format!("sweep_{name}"));
    let rows = args
        .values
        .par_iter()
        .map(|&v| {
            let (row, csv) = sweep_point(&s, args, v, baseline_cost)?;
            write(&dir.join(format!("point_{v}.csv")), &csv)?;
            Ok(row)
        })
        .collect::<Result<Vec<SweepRow>>>()?;
    write(&args.out.join(format!("sweep_{name}.csv")), &report::sweep_csv(&rows)?)?;
    println!("{:>14} {:>4} {:>12} {:>12} {:>10}", name, "H", "cost/MWh", "saving", "capped>π");
    for r in &rows {
        println!(
            "{:>14} {:>4} {:>12.4} {:>12.4} {:>10}",
            r.value, r.horizon, r.cost_per_mwh, r.saving_vs_baseline, r.cap_violated_hours
        );
    }
    Ok(())
}

fn cmd_validate(args: &ScenarioArgs) -> Result<()> {
    let (s, strictness) = load(args)?;
    let warnings = s.validate(strictness)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let baseline = mpc::run_baseline(&s).context("baseline dispatch")?;
    let above = baseline.hours_above(&caps(&s), report::CAP_TOLERANCE);
    println!(
        "ok: `{}`, {} hours, {} bus(es), {} storage device(s), {} warning(s); uncapped price above the cap in hours {:?}",
        s.name,
        s.horizon(),
        s.network.buses.len(),
        s.storage.len(),
        warnings.len(),
        above
    );
    Ok(())
}

fn cmd_synthesize(args: &SynthArgs) -> Result<()> {
    let targets = CalibrationTargets {
        exceed_hours: args.exceed_hours.iter().copied().collect(),
        pi_des: args.pi_des,
        ..Default::default()
    };
    let s = scenario::synthesize_apx_like(args.seed, &targets)?;
    let path = scenario::save_scenario(&s, &args.out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Command::Run(a) => cmd_run(a),
        Command::Quantify(a) => cmd_quantify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Synthesize(a) => cmd_synthesize(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
