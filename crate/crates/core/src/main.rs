use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use freqshare::dynamics::{
    required_reserve, simulate_frequency, Contingency, DynamicsError, Integrator, Service, Side,
    SimConfig, SystemSnapshot,
};
use freqshare::investment::{
    compare_split, evaluate_viability, InvestmentError, SplitAdjustments, ViabilityLedger,
};
use freqshare::market::{clear_market, MarketError, PricingRule, ReserveBid, Unit};
use freqshare::output::{self, fmt_sig};
use freqshare::scenario::{
    run_pipeline, sweep_allocation_curve, PipelineError, Scenario, ScenarioError,
};
use freqshare::SharingRule;

#[derive(Parser, Debug)]
#[command(
    name = "freqshare",
    version,
    about = "Frequency-containment reserve cost allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the frequency trace after a contingency.
    Simulate(SimulateArgs),
    /// Clear a reserve bid stack for a given requirement.
    Clear(ClearArgs),
    /// Allocate one snapshot's reserve cost among the fleet.
    Allocate(AllocateArgs),
    /// Evaluate a project ledger, optionally against a split design.
    Viability(ViabilityArgs),
    /// Sweep a probe unit's capacity and record its allocated cost.
    Sweep(SweepArgs),
    /// Run the full pipeline over every snapshot of a scenario.
    Run(RunArgs),
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    inertia_gws: f64,
    #[arg(long)]
    contingency_gw: f64,
    /// Defaults to the required reserve for the contingency.
    #[arg(long)]
    reserve_gw: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    delivery_time_s: f64,
    #[arg(long, default_value_t = 50.0)]
    f_nominal_hz: f64,
    #[arg(long, default_value_t = 49.2)]
    f_min_hz: f64,
    #[arg(long)]
    rocof_limit_hz_per_s: Option<f64>,
    #[arg(long, value_enum, default_value_t = SideArg::Generation)]
    side: SideArg,
    #[arg(long, default_value_t = 1e-3)]
    step_s: f64,
    #[arg(long, default_value_t = 30.0)]
    horizon_s: f64,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Trapezoidal)]
    integrator: IntegratorArg,
    /// Directory for trace.csv; the trace goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum SideArg {
    Generation,
    Demand,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum IntegratorArg {
    ExplicitEuler,
    Trapezoidal,
}

#[derive(clap::Args, Debug)]
struct ClearArgs {
    /// CSV with columns provider_id,price,quantity_gw,side.
    #[arg(long)]
    bids: PathBuf,
    #[arg(long)]
    requirement_gw: f64,
    /// Which service's bids to clear.
    #[arg(long, default_value = "under-frequency")]
    service: String,
    #[arg(long, default_value = "pay-as-clear")]
    pricing: PricingRule,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct Overrides {
    #[arg(long)]
    rule: Option<SharingRule>,
    #[arg(long)]
    pricing: Option<PricingRule>,
}

impl Overrides {
    fn apply(&self, scenario: &mut Scenario) {
        if let Some(rule) = self.rule {
            scenario.allocation_rule = rule;
        }
        if let Some(pricing) = self.pricing {
            scenario.pricing_rule = pricing;
        }
    }
}

#[derive(clap::Args, Debug)]
struct AllocateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Snapshot label; defaults to the first snapshot.
    #[arg(long)]
    snapshot: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ViabilityArgs {
    /// JSON ledger.
    #[arg(long)]
    ledger: PathBuf,
    /// Scenario for the split comparison.
    #[arg(long, requires_all = ["unit_id", "capacity_gw", "parts", "fuel_penalty_per_year", "investment_penalty"])]
    scenario: Option<PathBuf>,
    #[arg(long)]
    unit_id: Option<String>,
    #[arg(long)]
    capacity_gw: Option<f64>,
    #[arg(long, value_enum, default_value_t = SideArg::Generation)]
    side: SideArg,
    #[arg(long)]
    parts: Option<u32>,
    /// Extra fuel cost per year of the split design.
    #[arg(long)]
    fuel_penalty_per_year: Option<f64>,
    /// Extra investment of the split design.
    #[arg(long)]
    investment_penalty: Option<f64>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated capacities in GW; defaults to the scenario's sweep grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// Maps failures onto exit codes: 2 for invalid input, 3 for scarcity or
/// infeasibility, 1 for anything else (I/O).
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return if e.is_scarcity() { 3 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<InvestmentError>() {
            return match e {
                InvestmentError::Pipeline(p) if p.is_scarcity() => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<ScenarioError>() {
            return match e {
                ScenarioError::Io { .. } => 1,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<MarketError>() {
            return match e {
                MarketError::Scarcity { .. } => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<DynamicsError>() {
            return match e {
                DynamicsError::RocofInfeasible { .. } => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<csv::Error>().is_some()
        {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Clear(args) => clear(args),
        Command::Allocate(args) => allocate(args),
        Command::Viability(args) => viability(args),
        Command::Sweep(args) => sweep(args),
        Command::Run(args) => run(args),
    }
}

fn side(arg: SideArg) -> Side {
    match arg {
        SideArg::Generation => Side::Generation,
        SideArg::Demand => Side::Demand,
    }
}

fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    let mut scenario = Scenario::from_path(path)?;
    overrides.apply(&mut scenario);
    Ok(scenario)
}

/// Writes to `dir/name` when `out` is set, stdout otherwise.
fn emit(
    out: Option<&Path>,
    name: &str,
    write: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            let mut file =
                fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write(&mut file)
        }
        None => write(&mut io::stdout().lock()),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let snapshot = SystemSnapshot {
        label: "cli".to_string(),
        inertia_gws: args.inertia_gws,
        f_nominal_hz: args.f_nominal_hz,
        f_min_hz: args.f_min_hz,
        rocof_limit_hz_per_s: args.rocof_limit_hz_per_s,
        delivery_time_s: args.delivery_time_s,
        weight_hours: 0.0,
    };
    let contingency = Contingency {
        size_gw: args.contingency_gw,
        side: side(args.side),
    };
    let reserve = match args.reserve_gw {
        Some(r) => r,
        None => required_reserve(&snapshot, contingency)?,
    };
    let config = SimConfig {
        step_s: args.step_s,
        horizon_s: args.horizon_s,
        integrator: match args.integrator {
            IntegratorArg::ExplicitEuler => Integrator::ExplicitEuler,
            IntegratorArg::Trapezoidal => Integrator::Trapezoidal,
        },
    };
    let trace = simulate_frequency(&snapshot, contingency, reserve, &config)?;
    eprintln!(
        "reserve_gw={} nadir_hz={} nadir_time_s={} initial_rocof_hz_per_s={} secure={} unbounded={}",
        fmt_sig(reserve),
        fmt_sig(trace.nadir_hz),
        fmt_sig(trace.nadir_time_s),
        fmt_sig(trace.initial_rocof_hz_per_s),
        trace.secure,
        trace.unbounded
    );
    emit(args.out.as_deref(), "trace.csv", |w| {
        Ok(output::write_trace_csv(w, &trace)?)
    })
}

fn read_bids(path: &Path) -> Result<Vec<ReserveBid>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let bids = reader
        .deserialize()
        .collect::<Result<Vec<ReserveBid>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(bids)
}

fn clear(args: ClearArgs) -> Result<()> {
    let service: Service = serde_json::from_value(serde_json::Value::String(args.service.clone()))
        .with_context(|| format!("unknown service '{}'", args.service))?;
    let bids: Vec<ReserveBid> = read_bids(&args.bids)?
        .into_iter()
        .filter(|b| b.side == service)
        .collect();
    let result = clear_market(args.requirement_gw, &bids, args.pricing)?;
    eprintln!(
        "requirement_gw={} marginal_price={} total_cost_rate={} pricing={}",
        fmt_sig(result.requirement_gw),
        fmt_sig(result.marginal_price),
        fmt_sig(result.total_cost_rate),
        result.pricing_rule.as_str()
    );
    emit(args.out.as_deref(), "clearing.csv", |w| {
        Ok(output::write_clearing_csv(w, &result)?)
    })
}

fn allocate(args: AllocateArgs) -> Result<()> {
    let mut scenario = load_scenario(&args.scenario, &args.overrides)?;
    let label = match args.snapshot {
        Some(label) => label,
        None => scenario
            .snapshots
            .first()
            .map(|s| s.system.label.clone())
            .unwrap_or_default(),
    };
    if scenario.snapshot(&label).is_none() {
        anyhow::bail!(PipelineError::Scenario(ScenarioError::Validation {
            field: "snapshot".into(),
            message: format!("no snapshot labelled '{label}'"),
        }));
    }
    scenario.snapshots.retain(|s| s.system.label == label);
    let report = run_pipeline(&scenario)?;
    for side in &report.snapshots[0].sides {
        eprintln!(
            "{} {}: total_cost_rate={} residual_cost_rate={} cutoff_size_gw={}",
            label,
            side.service().as_str(),
            fmt_sig(side.clearing.total_cost_rate),
            fmt_sig(side.allocation.residual_cost_rate),
            fmt_sig(side.cutoff_size_gw)
        );
    }
    emit(args.out.as_deref(), "allocation.csv", |w| {
        Ok(output::write_allocation_csv(w, &report, &label)?)
    })
}

fn viability(args: ViabilityArgs) -> Result<()> {
    let text = fs::read_to_string(&args.ledger)
        .with_context(|| format!("reading {}", args.ledger.display()))?;
    let ledger: ViabilityLedger = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.ledger.display()))?;

    let Some(scenario_path) = args.scenario else {
        let v = evaluate_viability(&ledger)?;
        let mut out = io::stdout().lock();
        writeln!(out, "viable,net_margin")?;
        writeln!(out, "{},{}", v.viable, fmt_sig(v.net_margin))?;
        return Ok(());
    };

    let scenario = load_scenario(&scenario_path, &args.overrides)?;
    let unit = Unit {
        id: args.unit_id.expect("required by clap"),
        capacity_gw: args.capacity_gw.expect("required by clap"),
        side: side(args.side),
        technology: "candidate".to_string(),
        existing: false,
    };
    let adjustments = SplitAdjustments {
        fuel_cost_per_year: args.fuel_penalty_per_year.expect("required by clap"),
        investment_cost: args.investment_penalty.expect("required by clap"),
    };
    let comparison = compare_split(
        &scenario,
        &unit,
        args.parts.expect("required by clap"),
        &ledger,
        &adjustments,
    )?;
    eprintln!("winner={}", comparison.winner);
    emit(args.out.as_deref(), "split.csv", |w| {
        Ok(output::write_split_csv(w, &comparison)?)
    })
}

fn sweep(args: SweepArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario, &args.overrides)?;
    let grid = match args.grid {
        Some(grid) => grid,
        None => scenario
            .sweep
            .as_ref()
            .map(|s| s.capacity_gw.clone())
            .ok_or_else(|| {
                PipelineError::Scenario(ScenarioError::Validation {
                    field: "sweep".into(),
                    message: "no --grid given and the scenario has no sweep section".into(),
                })
            })?,
    };
    let table = sweep_allocation_curve(&scenario, &grid).map_err(PipelineError::Scenario)?;
    for (label, cutoff) in &table.cutoffs {
        eprintln!(
            "{label}: cutoff_size_gw={}",
            cutoff.map_or_else(|| "none".to_string(), fmt_sig)
        );
    }
    match args.out.as_deref() {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            output::write_sweep_csv(fs::File::create(dir.join("sweep.csv"))?, &table)?;
            output::write_sweep_cutoffs_csv(
                fs::File::create(dir.join("sweep_cutoffs.csv"))?,
                &table,
            )?;
            Ok(())
        }
        None => Ok(output::write_sweep_csv(io::stdout().lock(), &table)?),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario, &args.overrides)?;
    let report = run_pipeline(&scenario)?;
    let table = match &scenario.sweep {
        Some(spec) => Some(
            sweep_allocation_curve(&scenario, &spec.capacity_gw)
                .map_err(PipelineError::Scenario)?,
        ),
        None => None,
    };
    output::write_run_dir(&args.out, &report, table.as_ref())
        .with_context(|| format!("writing {}", args.out.display()))?;
    for snap in &report.snapshots {
        for side in &snap.sides {
            eprintln!(
                "{} {}: requirement_gw={} total_cost_rate={} cutoff_size_gw={}",
                snap.label,
                side.service().as_str(),
                fmt_sig(side.clearing.requirement_gw),
                fmt_sig(side.clearing.total_cost_rate),
                fmt_sig(side.cutoff_size_gw)
            );
        }
    }
    Ok(())
}
