//! `carbon-aoi`: run episodes, calibrate multipliers, sweep experiment grids,
//! tabulate the transmission boundary and run the built-in validation suites.
//!
//! Exit codes: 0 on success, 1 when a run or validation fails, 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use carbon_aoi::calibration::{calibrate, CalibrationOptions};
use carbon_aoi::model::{carbon_cost, compose_energy, EnergyComponents, SimConfig};
use carbon_aoi::par;
use carbon_aoi::policies::{IndexMode, PolicySpec};
use carbon_aoi::reporting::{
    boundary_table, config_digest, emit, linspace, load_config_toml, output_file_name, run_episode, save_config_toml,
    sweep, write_per_slot_csv, OutputFormat, SweepSpec,
};
use carbon_aoi::traces::{load_ci_csv, resample_to_slots, synthetic_trace, CarbonTrace, Region};
use carbon_aoi::validate::{run_suite, Suite};
use carbon_aoi::whittle::IndexContext;

const OUT_DIR_ENV: &str = "CARBON_AOI_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "carbon-aoi", version, about = "Carbon-aware Age-of-Information scheduling simulator")]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one episode and write per-slot and summary files.
    Simulate(SimulateArgs),
    /// Find the carbon and duty multipliers that meet the budgets.
    Calibrate(CalibrateArgs),
    /// Run a grid of regions, budgets, source counts and policies.
    Sweep(SweepArgs),
    /// Tabulate the critical age against carbon intensity.
    Boundary(BoundaryArgs),
    /// Run the built-in consistency checks.
    Validate(ValidateArgs),
    /// Compose the per-update energy from hardware parameters.
    ComposeEnergy(ComposeArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// TOML configuration; defaults to the reference deployment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of sources (overrides the config).
    #[arg(long)]
    num_sources: Option<usize>,
    /// Carbon budget in config units (overrides the config).
    #[arg(long)]
    kappa: Option<f64>,
    /// Seed for policy randomness (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Carbon-intensity CSV (timestamp, gCO2/kWh).
    #[arg(long, conflicts_with = "region")]
    trace: Option<PathBuf>,
    /// Synthetic region used when no trace is given.
    #[arg(long, value_enum, default_value_t = RegionArg::Medium)]
    region: RegionArg,
    /// Seed for the synthetic trace noise.
    #[arg(long, default_value_t = 0)]
    trace_seed: u64,
    /// Gateway forwarding rule for SAOITHE.
    #[arg(long, value_enum, default_value_t = ModeArg::Greedy)]
    mode: ModeArg,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = PolicyArg::Saoithe)]
    policy: PolicyArg,
    /// Carbon multiplier; SAOITHE calibrates when omitted.
    #[arg(long)]
    lambda: Option<f64>,
    /// Duty multiplier; defaults to 0 when lambda is given.
    #[arg(long, requires = "lambda")]
    mu: Option<f64>,
    /// Round-robin period; derived from the budget when omitted.
    #[arg(long)]
    period: Option<usize>,
    /// Random-policy transmission probability; 1/period when omitted.
    #[arg(long)]
    tx_probability: Option<f64>,
    /// Disable the budget gate.
    #[arg(long)]
    no_gate: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Relative tolerance on each budget.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// TOML sweep definition; defaults to the full reference grid.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Worker threads (0 or omitted uses all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    #[arg(long, default_value_t = 50.0)]
    xi_min: f64,
    #[arg(long, default_value_t = 450.0)]
    xi_max: f64,
    #[arg(long, default_value_t = 9)]
    steps: usize,
    /// Carbon multiplier; defaults to 100 / CF(50, E).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Energy per update in joules; defaults to the reference deployment.
    #[arg(long)]
    e_tot: Option<f64>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
}

#[derive(Args, Debug)]
struct ComposeArgs {
    /// TOML file with energy components; defaults to the reference hardware.
    #[arg(long)]
    components: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RegionArg {
    Low,
    Medium,
    High,
}

impl From<RegionArg> for Region {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::Low => Region::Low,
            RegionArg::Medium => Region::Medium,
            RegionArg::High => Region::High,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Greedy,
    Gated,
}

impl From<ModeArg> for IndexMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Greedy => IndexMode::Greedy,
            ModeArg::Gated => IndexMode::Gated,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Saoithe,
    RoundRobin,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Whittle,
    Oracle,
    Dynamics,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Whittle => Suite::Whittle,
            SuiteArg::Oracle => Suite::Oracle,
            SuiteArg::Dynamics => Suite::Dynamics,
            SuiteArg::All => Suite::All,
        }
    }
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Simulate(a) => simulate(&cli.out, a),
        Command::Calibrate(a) => calibrate_cmd(&cli.out, a),
        Command::Sweep(a) => sweep_cmd(&cli.out, a),
        Command::Boundary(a) => boundary(a),
        Command::Validate(a) => validate(a),
        Command::ComposeEnergy(a) => compose(a),
    }
}

fn resolve(input: &InputArgs) -> CliResult<(SimConfig, CarbonTrace, String)> {
    let mut cfg = match &input.config {
        Some(p) => load_config_toml(p)?,
        None => SimConfig::default(),
    };
    if let Some(n) = input.num_sources {
        cfg.num_sources = n;
    }
    if let Some(k) = input.kappa {
        cfg.cf_budget = k;
    }
    if let Some(s) = input.seed {
        cfg.rng_seed = s;
    }
    let cfg = cfg.validate()?;
    let (trace, label) = match &input.trace {
        Some(p) => {
            let raw = load_ci_csv(p)?;
            let start = *raw.timestamps.first().ok_or("trace file has no samples")?;
            let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
            (resample_to_slots(&raw, cfg.slot_duration, cfg.horizon_slots, start)?, label)
        }
        None => {
            let region = Region::from(input.region);
            (synthetic_trace(region, cfg.horizon_slots, cfg.slot_duration, input.trace_seed)?, region.label().to_string())
        }
    };
    Ok((cfg, trace, label))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    std::fs::write(path, body)?;
    Ok(())
}

fn simulate(out: &Path, a: SimulateArgs) -> CliResult<ExitCode> {
    let (cfg, trace, label) = resolve(&a.input)?;
    let mode = IndexMode::from(a.input.mode);
    let mut calibration = None;
    let spec = match a.policy {
        PolicyArg::Saoithe => {
            let (lambda, mu) = match a.lambda {
                Some(l) => (l, a.mu.unwrap_or(0.0)),
                None => {
                    let opts = CalibrationOptions { mode, ..CalibrationOptions::default() };
                    let (l, m, rep) = calibrate(&cfg, &trace, &opts)?;
                    calibration = Some(json!({
                        "converged": rep.converged,
                        "iterations": rep.iterations,
                        "fallback": rep.fallback,
                    }));
                    (l, m)
                }
            };
            PolicySpec::Saoithe { lambda, mu, mode, pipeline: Default::default() }
        }
        PolicyArg::RoundRobin => PolicySpec::RoundRobin { period: a.period },
        PolicyArg::Random => PolicySpec::Random { tx_probability: a.tx_probability },
    };
    let mut policy = spec.build(&cfg, &trace)?;
    let result = run_episode(&cfg, &trace, policy.as_mut(), !a.no_gate)?;

    std::fs::create_dir_all(out)?;
    let stem = output_file_name(spec.label(), &label, cfg.num_sources, cfg.cf_budget);
    let stem = stem.trim_end_matches(".csv");
    let data_path = match a.format {
        FormatArg::Csv => {
            let p = out.join(format!("{stem}.csv"));
            write_per_slot_csv(&result, std::io::BufWriter::new(std::fs::File::create(&p)?))?;
            p
        }
        FormatArg::Json => out.join(format!("{stem}.json")),
    };
    emit(&result, OutputFormat::Json, &out.join(format!("{stem}.summary.json")))?;
    if matches!(a.format, FormatArg::Json) {
        emit(&result, OutputFormat::Json, &data_path)?;
    }
    save_config_toml(&cfg, &out.join(format!("{stem}.config.toml")))?;
    write_json(
        &out.join(format!("{stem}.run.json")),
        &json!({
            "policy": spec,
            "trace": label,
            "trace_seed": a.input.trace_seed,
            "rng_seed": cfg.rng_seed,
            "gate": !a.no_gate,
            "config_digest": config_digest(&cfg),
            "calibration": calibration,
        }),
    )?;

    let s = result.summary();
    println!(
        "{} {} N={} kappa={}: avg AoI {:.3} min, CF {:.4} / {:.4} g, duty {:.6} / {}, digest {}",
        s.policy, label, s.num_sources, cfg.cf_budget, s.avg_aoi_minutes, s.total_cf, s.cf_budget, s.total_duty,
        s.duty_budget, s.digest
    );
    println!("wrote {}", data_path.display());
    Ok(ExitCode::SUCCESS)
}

fn calibrate_cmd(out: &Path, a: CalibrateArgs) -> CliResult<ExitCode> {
    let (cfg, trace, label) = resolve(&a.input)?;
    let opts = CalibrationOptions {
        tolerance: a.tol,
        max_iters: a.max_iters,
        mode: a.input.mode.into(),
        ..CalibrationOptions::default()
    };
    let (lambda, mu, report) = calibrate(&cfg, &trace, &opts)?;
    std::fs::create_dir_all(out)?;
    let name = format!("calibration_{label}_N{}_kappa{}", cfg.num_sources, cfg.cf_budget);
    write_json(&out.join(format!("{name}.json")), &report)?;
    save_config_toml(&cfg, &out.join(format!("{name}.config.toml")))?;
    println!(
        "lambda* = {lambda:.6e}  mu* = {mu:.6e}  converged = {}  fallback = {}  iterations = {}",
        report.converged, report.fallback, report.iterations
    );
    Ok(ExitCode::SUCCESS)
}

fn sweep_cmd(out: &Path, a: SweepArgs) -> CliResult<ExitCode> {
    let spec: SweepSpec = match &a.spec {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
        None => SweepSpec::default(),
    };
    let result = par::with_jobs(a.jobs, || sweep(&spec))?;
    std::fs::create_dir_all(out)?;
    for (cell, ep) in result.cells.iter().zip(&result.episodes) {
        if let Some(ep) = ep {
            let name =
                output_file_name(cell.policy.label(), cell.region.label(), cell.num_sources, cell.kappa);
            emit(ep, OutputFormat::Csv, &out.join(name))?;
        }
    }
    write_json(&out.join("sweep.json"), &result)?;
    std::fs::write(out.join("sweep_spec.toml"), toml::to_string(&spec)?)?;
    println!("{:<8} {:>5} {:>7} {:<12} {:>12} {:>10}", "region", "N", "kappa", "policy", "AoI [min]", "±95%");
    for c in &result.cells {
        match &c.outcome {
            carbon_aoi::reporting::CellOutcome::Ok { avg_aoi_minutes, half_width_minutes, .. } => println!(
                "{:<8} {:>5} {:>7} {:<12} {:>12.3} {:>10.3}",
                c.region.label(),
                c.num_sources,
                c.kappa,
                c.policy.label(),
                avg_aoi_minutes,
                half_width_minutes
            ),
            carbon_aoi::reporting::CellOutcome::Failed { error } => println!(
                "{:<8} {:>5} {:>7} {:<12} failed: {error}",
                c.region.label(),
                c.num_sources,
                c.kappa,
                c.policy.label()
            ),
        }
    }
    println!("digest {}  failures {}", result.digest, result.failures());
    Ok(ExitCode::SUCCESS)
}

fn boundary(a: BoundaryArgs) -> CliResult<ExitCode> {
    let base = SimConfig::default();
    let e_tot = a.e_tot.unwrap_or(base.energy.e_tot_per_update);
    let lambda = match a.lambda {
        Some(l) => l,
        None => 100.0 / carbon_cost(50.0, e_tot)?,
    };
    let ctx = IndexContext::new(lambda, a.mu, a.xi_min, e_tot, base.duty_cost_frac())?;
    let table = boundary_table(&linspace(a.xi_min, a.xi_max, a.steps), &ctx, lambda)?;
    println!("xi_gco2_per_kwh,cost,critical_age");
    for r in &table.rows {
        println!("{},{},{}", r.xi, r.cost, r.critical_age);
    }
    if let Some(e) = table.fitted_exponent {
        eprintln!("fitted exponent d ln(critical age) / d ln(cost) = {e:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(a: ValidateArgs) -> CliResult<ExitCode> {
    let checks = run_suite(a.suite.into());
    for c in &checks {
        println!("{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn compose(a: ComposeArgs) -> CliResult<ExitCode> {
    let c: EnergyComponents = match &a.components {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
        None => EnergyComponents::table1(),
    };
    let total = compose_energy(&c)?;
    println!("time_on_air_s = {:.6}", c.time_on_air()?);
    println!("device_j = {:.6}", c.device_energy()?);
    println!("gateway_j = {:.6}", c.gateway_energy());
    println!("server_j = {:.6}", c.server_energy()?);
    println!("e_tot_j = {total:.6}");
    Ok(ExitCode::SUCCESS)
}
