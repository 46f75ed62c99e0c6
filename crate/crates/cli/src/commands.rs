use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cellwatch_core::data::{assemble_batches, read_path, write_jsonl, DataRecord};
use cellwatch_core::example::{worked_example_records, worked_example_scenario};
use cellwatch_core::indicators::write_indicator_csv;
use cellwatch_core::orchestrator::ScenarioState;
use cellwatch_core::scenario::{PriorSpec, ScenarioConfig};
use cellwatch_core::sim::{simulate_records, PairSim, RateTrajectory, SimulationSpec};
use cellwatch_core::Error;
use clap::{Args, Parser, Subcommand};

use crate::report::summary;
use crate::store::{write_atomic, Store, SCENARIO_FILE};

pub const DATA_FILE: &str = "data.jsonl";
pub const INDICATORS_FILE: &str = "indicators.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Parser)]
#[command(name = "cellwatch", version, about = "Threat-state, edge-weight and attack-indicator tracking for monitored groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario file and a synthetic observation stream.
    Simulate(SimulateArgs),
    /// Replay an observation stream and write reports.
    Run(RunArgs),
    /// Serve a scenario over HTTP.
    Serve(ServeArgs),
    /// Print the summary tables of a snapshot.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Simulation spec (`{"scenario": ..., "ticks": ..., "pairs": [...]}`) or a bare scenario.
    #[arg(long, required_unless_present = "paper_example")]
    pub config: Option<PathBuf>,
    /// Number of ticks to generate; overrides the spec.
    #[arg(long)]
    pub weeks: Option<u64>,
    /// Master seed; defaults to the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Emit the bundled four-suspect example with its published call data.
    #[arg(long)]
    pub paper_example: bool,
    #[arg(long, env = "CELLWATCH_DATA_DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario JSON.
    #[arg(long, conflicts_with_all = ["paper_example", "snapshot"])]
    pub config: Option<PathBuf>,
    /// Observation stream (`.csv` or JSONL).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use the bundled example scenario (and its data when `--data` is absent).
    #[arg(long, conflicts_with = "snapshot")]
    pub paper_example: bool,
    /// Resume from a snapshot; data at or before its tick is skipped.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long, env = "CELLWATCH_DATA_DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, conflicts_with_all = ["paper_example", "snapshot"])]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "snapshot")]
    pub paper_example: bool,
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory for the event log and snapshots; an existing scenario there is resumed.
    #[arg(long, env = "CELLWATCH_DATA_DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Also write the summary and indicator CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

pub fn load_snapshot(path: &Path) -> Result<ScenarioState> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ScenarioState::from_snapshot_json(&text)?)
}

/// Reads a simulation spec, or a bare scenario whose edges get constant rates at their prior means.
pub fn load_simulation(path: &Path) -> Result<SimulationSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
    let Some(scenario) = value.get_mut("scenario").map(serde_json::Value::take) else {
        let scenario = ScenarioConfig::from_json(&text)?;
        let pairs = scenario
            .edges
            .iter()
            .map(|e| {
                let prior = e.prior.unwrap_or_else(|| scenario.edge_priors.for_origin(e.origin));
                let rate = prior_mean(prior).unwrap_or(1.0);
                PairSim { pair: e.pair.clone(), rate: RateTrajectory::Constant { rate } }
            })
            .collect();
        return Ok(SimulationSpec { scenario, ticks: 10, pairs, signals: true });
    };
    let scenario = ScenarioConfig::from_json(&scenario.to_string()).map_err(|e| match e {
        Error::Schema { path, message } => Error::schema(format!("scenario.{path}"), message),
        other => other,
    })?;
    value["scenario"] = serde_json::to_value(&scenario)?;
    Ok(serde_json::from_value(value).map_err(|e| Error::schema("$", e.to_string()))?)
}

fn write_records(path: &Path, records: &[DataRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records)?;
    write_atomic(path, &buf)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    let (scenario, records) = if args.paper_example {
        (worked_example_scenario(0.7), worked_example_records())
    } else {
        let path = args.config.as_ref().context("--config is required")?;
        let mut spec = load_simulation(path)?;
        if let Some(w) = args.weeks {
            spec.ticks = w;
        }
        let seed = args.seed.unwrap_or(spec.scenario.seed);
        spec.scenario.seed = seed;
        let records = simulate_records(&spec, seed)?;
        (spec.scenario, records)
    };
    write_atomic(&args.out.join(SCENARIO_FILE), scenario.to_json().as_bytes())?;
    write_records(&args.out.join(DATA_FILE), &records)?;
    Ok(())
}

/// Replays the requested data and writes the report files; returns the final state.
pub fn run(args: &RunArgs) -> Result<ScenarioState> {
    let (mut state, resumed) = match (&args.snapshot, &args.config, args.paper_example) {
        (Some(p), _, _) => (load_snapshot(p)?, true),
        (None, Some(p), _) => (ScenarioState::new(load_scenario(p)?)?, false),
        (None, None, true) => (ScenarioState::new(worked_example_scenario(0.7))?, false),
        (None, None, false) => bail!("one of --config, --paper-example or --snapshot is required"),
    };
    let mut records = match (&args.data, args.paper_example) {
        (Some(p), _) => read_path(p)?,
        (None, true) => worked_example_records(),
        (None, false) => Vec::new(),
    };
    if resumed {
        records.retain(|r| r.tick() > state.tick);
    }
    for batch in assemble_batches(&records, state.tick, None)? {
        state.commit(batch)?;
    }
    write_outputs(&state, &args.out)?;
    Ok(state)
}

pub fn write_outputs(state: &ScenarioState, out: &Path) -> Result<()> {
    let store = Store::open(out)?;
    store.initialize(state)?;
    let reports: Vec<_> = state.event_log.iter().flat_map(|r| r.indicators.iter().cloned()).collect();
    let mut csv = Vec::new();
    write_indicator_csv(&mut csv, &reports)?;
    write_atomic(&out.join(INDICATORS_FILE), &csv)?;
    write_atomic(&out.join(SUMMARY_FILE), summary(state).as_bytes())?;
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<String> {
    let state = load_snapshot(&args.snapshot)?;
    if let Some(out) = &args.out {
        write_outputs(&state, out)?;
    }
    Ok(summary(&state))
}

/// State to serve: an explicit source if given, else whatever the data directory holds.
pub fn serve_state(args: &ServeArgs) -> Result<(ScenarioState, Option<Store>)> {
    let store = args.out.as_ref().map(Store::open).transpose()?;
    let explicit = match (&args.snapshot, &args.config, args.paper_example) {
        (Some(p), _, _) => Some(load_snapshot(p)?),
        (None, Some(p), _) => Some(ScenarioState::new(load_scenario(p)?)?),
        (None, None, true) => Some(ScenarioState::new(worked_example_scenario(0.7))?),
        (None, None, false) => None,
    };
    let state = match (explicit, &store) {
        (Some(s), Some(store)) => {
            store.initialize(&s)?;
            s
        }
        (Some(s), None) => s,
        (None, Some(store)) => store.load()?.with_context(|| format!("no scenario in {}", store.dir().display()))?,
        (None, None) => bail!("nothing to serve: pass --config, --paper-example, --snapshot or a data directory"),
    };
    Ok((state, store))
}

/// Machine-readable error report for the command line.
pub fn error_report(err: &anyhow::Error) -> serde_json::Value {
    let (kind, path) = match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Schema { path, .. }) => ("Schema", Some(path.clone())),
        Some(e) => (e.kind(), None),
        None if err.chain().any(|e| e.is::<std::io::Error>()) => ("Io", None),
        None => ("Usage", None),
    };
    let mut v = serde_json::json!({ "error": { "kind": kind, "message": format!("{err:#}") } });
    if let Some(p) = path {
        v["error"]["path"] = p.into();
    }
    v
}

fn prior_mean(prior: PriorSpec) -> Option<f64> {
    let (a, b) = prior.params();
    (b > 0.0).then(|| a / b)
}
