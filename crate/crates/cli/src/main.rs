mod error;
mod output;
mod plot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mpcom::planner::{make_baseline, BaselineKind, PlannerConfig};
use mpcom::radio::{
    fit_distance_model, fit_multizone, generate_radio_map, segment_zones, FitSettings, RadioMapGrid,
};
use mpcom::scenarios;
use mpcom::sim::{
    evaluate_suite, format_cell, plan_at_start, run_episode, PreparedScenario, PreparedSensor,
    Scenario, SimError, SuiteRow, SuiteTable,
};

use crate::error::CliError;
use crate::output::{RunManifest, Staging};

#[derive(Parser)]
#[command(name = "mpcom", version, about = "Communication-aware motion planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truth radio maps and heatmaps for a scenario.
    RadioGenerate {
        #[command(flatten)]
        target: Target,
    },
    /// Fit the multi-zone and distance models to a radio map.
    RadioFit(FitArgs),
    /// Run one episode.
    Simulate(RunArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Solve the first planning problem of a scenario and dump the objective trace.
    PlanDebug(RunArgs),
}

#[derive(Args)]
struct Target {
    /// Scenario JSON file, or the name of a built-in scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ZoneSource {
    /// Zones listed in the scenario's sensor entry.
    Scenario,
    /// Zones segmented from the map itself.
    Auto,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    zones: ZoneSource,
    /// Scenario providing zones, d_min and the LOS gain pin (with --zones scenario).
    #[arg(long)]
    scenario: Option<String>,
    /// Index of the sensor entry in the scenario.
    #[arg(long, default_value_t = 0)]
    sensor: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Default, Serialize)]
struct Overrides {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
}

impl Overrides {
    fn apply(&self, base: &PlannerConfig) -> PlannerConfig {
        let mut c = base.clone();
        if let Some(rho) = self.rho {
            c.rho = rho;
        }
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        if let Some(tau) = self.tau {
            c.tau = tau;
        }
        c
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, value_parser = parse_method)]
    method: BaselineKind,
    #[command(flatten)]
    overrides: Overrides,
    /// Seed for the scenario's obstacle jitter; defaults to the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use these radio maps (one per sensor, in order) instead of generating them.
    #[arg(long = "map")]
    maps: Vec<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

fn parse_method(s: &str) -> Result<BaselineKind, String> {
    s.parse()
}

/// Benchmark description read by `bench`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Suite {
    scenarios: Vec<SuiteScenario>,
    methods: Vec<String>,
    #[serde(default = "one")]
    repeats: usize,
    /// Base planner settings; command-line overrides apply on top.
    #[serde(default)]
    config: PlannerConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteScenario {
    scenario: String,
    /// Regularizer weight for this scenario only.
    #[serde(default)]
    rho: Option<f64>,
}

fn one() -> usize {
    1
}

fn manifest(command: &str, scenario: Option<&str>, overrides: &Overrides, seed: Option<u64>, out: &Path) -> RunManifest {
    RunManifest {
        command: command.into(),
        scenario: scenario.map(str::to_owned),
        config_overrides: serde_json::to_value(overrides).unwrap_or_default(),
        seed,
        output_dir: out.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e))
}

/// Loads a scenario file, falling back to the built-in scenario of that name.
fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(s) = scenarios::by_name(arg) {
            return Ok(s);
        }
    }
    let scenario: Scenario = read_json(path)?;
    scenario.validate().map_err(|e| CliError::data(arg, e))?;
    Ok(scenario)
}

fn sim_error(context: &str, e: SimError) -> CliError {
    match e {
        SimError::PlannerFailure(_) => CliError::Planner(format!("{context}: {e}")),
        SimError::Config(_) => CliError::Usage(format!("{context}: {e}")),
        _ => CliError::data(context, e),
    }
}

fn prepare(scenario: &Scenario, maps: &[PathBuf]) -> Result<PreparedScenario, CliError> {
    if maps.is_empty() {
        return scenario.prepare().map_err(|e| sim_error(&scenario.name, e));
    }
    if maps.len() != scenario.sensors.len() {
        return Err(CliError::Usage(format!(
            "{} maps given for {} sensors",
            maps.len(),
            scenario.sensors.len()
        )));
    }
    let sensors = scenario
        .sensors
        .iter()
        .zip(maps)
        .map(|(spec, path)| {
            let map: RadioMapGrid = read_json(path)?;
            PreparedSensor::from_map(spec, map).map_err(|e| CliError::data(path.display(), e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PreparedScenario {
        scenario: scenario.clone(),
        sensors,
    })
}

/// Checks the user's settings before the method adjusts them, so an invalid
/// override is reported rather than silently replaced.
fn checked_baseline(method: BaselineKind, base: &PlannerConfig) -> Result<PlannerConfig, CliError> {
    let usage = |e: mpcom::planner::PlannerError| CliError::Usage(e.to_string());
    base.validate().map_err(usage)?;
    let config = make_baseline(method, base);
    config.validate().map_err(usage)?;
    Ok(config)
}

fn run_config(args: &RunArgs) -> Result<PlannerConfig, CliError> {
    checked_baseline(args.method, &args.overrides.apply(&PlannerConfig::default()))
}

fn cmd_radio_generate(target: &Target) -> Result<(), CliError> {
    let scenario = load_scenario(&target.scenario)?;
    let staging = Staging::create(
        &target.out,
        &manifest("radio-generate", Some(&target.scenario), &Overrides::default(), None, &target.out),
    )?;
    for (k, sensor) in scenario.sensors.iter().enumerate() {
        let map = generate_radio_map(&scenario.walls, sensor.position, &scenario.radio_grid, &sensor.truth)
            .map_err(|e| CliError::data(format!("sensor {k}"), e))?;
        staging.write_json(&format!("map_{k}.json"), &map)?;
        staging.write(&format!("heatmap_{k}.svg"), plot::heatmap_svg(&map, &scenario.walls))?;
    }
    let out = staging.commit()?;
    println!("wrote {} radio map(s) to {}", scenario.sensors.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct DistanceFitFile {
    model: mpcom::radio::DistanceModel,
    rmse_db: f64,
}

fn cmd_radio_fit(args: &FitArgs) -> Result<(), CliError> {
    let map: RadioMapGrid = read_json(&args.map)?;
    let map_name = args.map.display().to_string();
    let scenario = args.scenario.as_deref().map(load_scenario).transpose()?;
    let spec = match &scenario {
        Some(s) => Some(s.sensors.get(args.sensor).ok_or_else(|| {
            CliError::Usage(format!("scenario has no sensor {}", args.sensor))
        })?),
        None => None,
    };
    let settings = match spec {
        Some(spec) => FitSettings {
            d_min: spec.truth.d_min,
            pinned_los_beta: spec.pin_los_beta.then_some(spec.truth.rho0),
            ..FitSettings::default()
        },
        None => FitSettings::default(),
    };
    let zones = match (args.zones, spec) {
        (ZoneSource::Scenario, Some(spec)) if !spec.zones.is_empty() => spec.zones.clone(),
        (ZoneSource::Scenario, Some(_)) => {
            return Err(CliError::Data("the scenario sensor lists no zones".into()))
        }
        (ZoneSource::Scenario, None) => {
            return Err(CliError::Usage("--zones scenario needs --scenario".into()))
        }
        (ZoneSource::Auto, _) => {
            segment_zones(&map, 6.0, 20, &settings).map_err(|e| CliError::data(&map_name, e))?
        }
    };
    let multizone = fit_multizone(&map, &zones, &settings).map_err(|e| CliError::data(&map_name, e))?;
    let (distance, distance_rmse) = fit_distance_model(&map, &settings);

    let staging = Staging::create(
        &args.out,
        &manifest("radio-fit", args.scenario.as_deref(), &Overrides::default(), None, &args.out),
    )?;
    staging.write_json("multizone.json", &multizone)?;
    staging.write_json(
        "distance.json",
        &DistanceFitFile {
            model: distance,
            rmse_db: distance_rmse,
        },
    )?;
    let mut rmse = csv::Writer::from_writer(Vec::new());
    rmse.write_record(["model", "rmse_db"]).expect("in-memory csv");
    rmse.write_record(["multizone", &format!("{:.6}", multizone.rmse_db)])
        .expect("in-memory csv");
    rmse.write_record(["distance", &format!("{distance_rmse:.6}")])
        .expect("in-memory csv");
    staging.write("rmse.csv", rmse.into_inner().expect("in-memory csv"))?;
    let mut zones_csv = csv::Writer::from_writer(Vec::new());
    zones_csv
        .write_record(["zone", "beta", "alpha", "rmse_db"])
        .expect("in-memory csv");
    for (l, z) in multizone.zone_fits.iter().enumerate() {
        zones_csv
            .write_record([
                l.to_string(),
                format!("{:.6e}", z.beta),
                format!("{:.6}", z.alpha),
                format!("{:.6}", z.rmse_db),
            ])
            .expect("in-memory csv");
    }
    staging.write("zones.csv", zones_csv.into_inner().expect("in-memory csv"))?;
    staging.commit()?;
    println!(
        "RMSE (dB): multizone {:.2}, distance {:.2}",
        multizone.rmse_db, distance_rmse
    );
    Ok(())
}

fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let config = run_config(args)?;
    let scenario = load_scenario(&args.target.scenario)?;
    let seed = args.seed.unwrap_or(scenario.seed);
    let prepared = prepare(&scenario, &args.maps)?.with_seed(seed);
    let staging = Staging::create(
        &args.target.out,
        &manifest("simulate", Some(&args.target.scenario), &args.overrides, Some(seed), &args.target.out),
    )?;
    staging.write_json("config.json", &config)?;
    let result = match run_episode(&prepared, &config) {
        Ok(r) => r,
        Err(e) => {
            let err = sim_error(&scenario.name, e);
            staging.write("error.txt", format!("{err}\n"))?;
            staging.commit()?;
            return Err(err);
        }
    };
    staging.write_json("episode.json", &result)?;
    staging.write(
        "trajectory.svg",
        plot::trajectory_svg(&prepared.scenario, prepared.sensors.first().map(|s| &s.map), &result),
    )?;
    staging.write("speed.svg", plot::speed_svg(&result, config.tau))?;
    staging.commit()?;
    println!(
        "{} {}: {:.3} MB in {:.1} s ({:.4} MB/s), reached goal {}, collided {}, success {}",
        scenario.name,
        args.method,
        result.total_megabytes,
        result.navigation_time,
        result.rdg_efficiency,
        result.reached_goal,
        result.collided,
        result.success
    );
    Ok(())
}

fn cmd_plan_debug(args: &RunArgs) -> Result<(), CliError> {
    let config = run_config(args)?;
    let scenario = load_scenario(&args.target.scenario)?;
    let seed = args.seed.unwrap_or(scenario.seed);
    let prepared = prepare(&scenario, &args.maps)?.with_seed(seed);
    let staging = Staging::create(
        &args.target.out,
        &manifest("plan-debug", Some(&args.target.scenario), &args.overrides, Some(seed), &args.target.out),
    )?;
    staging.write_json("config.json", &config)?;
    let plan = match plan_at_start(&prepared, &config) {
        Ok(p) => p,
        Err(e) => {
            let err = sim_error(&scenario.name, e);
            staging.write("error.txt", format!("{err}\n"))?;
            staging.commit()?;
            return Err(err);
        }
    };
    staging.write_json("plan.json", &plan)?;
    let mut trace = String::from("iteration,objective\n");
    for (n, v) in plan.objective_trace.iter().enumerate() {
        writeln!(trace, "{n},{v:.12e}").expect("string write");
    }
    staging.write("trace.csv", &trace)?;
    staging.commit()?;
    print!("{trace}");
    println!("status {:?} after {} MM iterations", plan.status, plan.mm_iterations);
    Ok(())
}

fn metric(row: &SuiteRow, value: f64, delta: Option<f64>) -> String {
    if row.failed() {
        "failed".into()
    } else {
        format_cell(value, delta)
    }
}

fn csv_number(row: &SuiteRow, value: f64) -> String {
    if row.failed() || !value.is_finite() {
        String::new()
    } else {
        format!("{value:.6}")
    }
}

fn csv_delta(row: &SuiteRow, delta: Option<f64>) -> String {
    match delta {
        Some(d) if !row.failed() && d.is_finite() => format!("{d:.4}"),
        _ => String::new(),
    }
}

fn results_csv(table: &SuiteTable) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "method",
        "status",
        "runs",
        "failed_runs",
        "rdg_efficiency_mb_per_s",
        "rdg_efficiency_delta_pct",
        "navigation_time_s",
        "navigation_time_delta_pct",
        "data_throughput_mb",
        "data_throughput_delta_pct",
        "success_rate",
        "collision_rate",
    ])
    .expect("in-memory csv");
    for r in &table.rows {
        w.write_record([
            r.scenario.clone(),
            r.label.clone(),
            if r.failed() { "failed" } else { "ok" }.into(),
            r.runs.to_string(),
            r.failed_runs.to_string(),
            csv_number(r, r.rdg_efficiency),
            csv_delta(r, r.efficiency_delta_pct),
            csv_number(r, r.navigation_time),
            csv_delta(r, r.navigation_time_delta_pct),
            csv_number(r, r.total_megabytes),
            csv_delta(r, r.throughput_delta_pct),
            csv_number(r, r.success_rate),
            csv_number(r, r.collision_rate),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn results_markdown(table: &SuiteTable) -> String {
    let mut md = String::new();
    let mut current = None;
    for r in &table.rows {
        if current != Some(&r.scenario) {
            if current.is_some() {
                md.push('\n');
            }
            current = Some(&r.scenario);
            writeln!(md, "### {}\n", r.scenario).unwrap();
            md.push_str("| Method | RDG Efficiency (MB/s) | Navigation Time (s) | Data Throughput (MB) | Success | Collisions |\n");
            md.push_str("|---|---|---|---|---|---|\n");
        }
        let rate = |x: f64| {
            if r.failed() {
                "failed".to_string()
            } else {
                format!("{:.0}%", 100.0 * x)
            }
        };
        writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} |",
            r.label,
            metric(r, r.rdg_efficiency, r.efficiency_delta_pct),
            metric(r, r.navigation_time, r.navigation_time_delta_pct),
            metric(r, r.total_megabytes, r.throughput_delta_pct),
            rate(r.success_rate),
            rate(r.collision_rate),
        )
        .unwrap();
    }
    md
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let suite: Suite = read_json(&args.suite)?;
    if suite.scenarios.is_empty() || suite.methods.is_empty() || suite.repeats == 0 {
        return Err(CliError::Data(format!(
            "{}: a suite needs scenarios, methods and repeats >= 1",
            args.suite.display()
        )));
    }
    let methods = suite
        .methods
        .iter()
        .map(|m| parse_method(m).map_err(CliError::Usage))
        .collect::<Result<Vec<_>, _>>()?;
    let base = args.overrides.apply(&suite.config);
    let mut prepared = Vec::new();
    for entry in &suite.scenarios {
        let scenario = load_scenario(&entry.scenario)?;
        let mut config = base.clone();
        if let Some(rho) = entry.rho {
            config.rho = rho;
        }
        let configs = methods
            .iter()
            .map(|&m| Ok((m.to_string(), checked_baseline(m, &config)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        prepared.push((prepare(&scenario, &[])?, configs));
    }

    let staging = Staging::create(
        &args.out,
        &manifest("bench", Some(&args.suite.display().to_string()), &args.overrides, None, &args.out),
    )?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    let table = pool.install(|| {
        let mut table = SuiteTable {
            rows: Vec::new(),
            entries: Vec::new(),
        };
        for (p, configs) in &prepared {
            let t = evaluate_suite(std::slice::from_ref(p), configs, suite.repeats);
            table.rows.extend(t.rows);
            table.entries.extend(t.entries);
        }
        table
    });
    for e in &table.entries {
        if let Err(msg) = &e.result {
            log::warn!("{} / {} repeat {}: {msg}", e.scenario, e.label, e.repeat);
        }
    }
    staging.write("results.csv", results_csv(&table))?;
    let md = results_markdown(&table);
    staging.write("results.md", &md)?;
    staging.write_json("episodes.json", &table.entries)?;
    staging.commit()?;
    print!("{md}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::RadioGenerate { target } => cmd_radio_generate(target),
        Command::RadioFit(args) => cmd_radio_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::PlanDebug(args) => cmd_plan_debug(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MPCOM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
