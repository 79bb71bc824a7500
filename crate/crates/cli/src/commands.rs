//! The subcommands, callable in-process.

use std::path::{Path, PathBuf};

use basket_core::decision::{summarize, UtilityConfig};
use basket_core::roster::read_roster;
use basket_core::seeds::{derive_seed, stream};
use basket_core::simulator::{
    calibrate_summaries, final_analysis, simulate as run_simulation, superiority_probs, CalibrationRow, Scenario,
    SimulationConfig, SimulationRun,
};
use serde::Serialize;

use crate::config::{load_config, sha256_hex, to_toml, LoadedConfig, ScenarioSpec};
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use crate::tables::{write_csv, write_text, Derived, RunTables};

/// Flags shared by the simulation commands.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub no_adaptive: bool,
    pub no_censoring: bool,
}

/// Configuration with command-line overrides applied.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub reps: usize,
    pub simulation: SimulationConfig,
}

pub fn prepare(args: &RunArgs) -> Result<Prepared> {
    let loaded = load_config(args.config.as_deref())?;
    let mut simulation = loaded.config.simulation.clone();
    if args.no_adaptive {
        simulation.adaptive = false;
    }
    if args.no_censoring {
        simulation.censoring = false;
    }
    let reps = args.reps.unwrap_or(loaded.config.reps);
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    if args.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    Ok(Prepared { seed: args.seed.unwrap_or(loaded.config.seed), reps, simulation, loaded })
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
        None => Ok(f()),
    }
}

fn manifest_for(command: &str, args: &RunArgs, p: &Prepared) -> RunManifest {
    let mut m = RunManifest::new(command, args.config.as_deref(), &p.loaded.digest, p.seed);
    m.reps = Some(p.reps);
    m.threads = args.threads;
    m
}

/// The effective configuration, written next to the outputs.
fn effective_config(p: &Prepared, scenario: &ScenarioSpec) -> Result<String> {
    let mut c = p.loaded.config.clone();
    c.seed = p.seed;
    c.reps = p.reps;
    c.simulation = p.simulation.clone();
    c.scenario = scenario.clone();
    to_toml(&c)
}

/// Simulates one scenario and writes its tables into `dir`.
fn run_into(dir: &Path, scenario: &Scenario, p: &Prepared, threads: Option<usize>, with_te: bool) -> Result<(SimulationRun, Vec<String>)> {
    std::fs::create_dir_all(dir)?;
    let run = in_pool(threads, || run_simulation(scenario, &p.simulation, p.seed, p.reps))??;
    let panel = &p.simulation.panel;
    let tables = RunTables::from_run(&run, panel, &scenario.name);
    let derived = tables.derive(panel, &run.true_report)?;
    let mut files = tables.write(dir, with_te)?;
    files.extend(derived.write(dir, with_te)?);
    Ok((run, files))
}

fn scenario_command(command: &str, args: &RunArgs, with_te: bool) -> Result<RunManifest> {
    let p = prepare(args)?;
    let spec = p.loaded.config.scenario.clone();
    let scenario = spec.scenario()?;
    let manifest = manifest_for(command, args, &p);
    let (_, mut files) = run_into(&args.out, &scenario, &p, args.threads, with_te)?;
    files.push(write_text(&args.out, "config.toml", &effective_config(&p, &spec)?)?);
    manifest.finish(&args.out, &files)
}

/// Per-replicate records, operating characteristics, Pr(a) and allocation fractions.
pub fn simulate(args: &RunArgs) -> Result<RunManifest> {
    scenario_command("simulate", args, false)
}

/// Everything `simulate` writes plus treatment-effect errors of OURS, NAIVE and SEPARATE.
pub fn compare(args: &RunArgs) -> Result<RunManifest> {
    scenario_command("compare", args, true)
}

#[derive(Debug, Clone, Serialize)]
struct SelectedUtility {
    met: bool,
    tie: f64,
    tpr: f64,
    utility: UtilityConfig,
}

/// Simulates scenarios 1 and 2 under the configured design and searches the (u0, u1) grid.
pub fn calibrate(args: &RunArgs) -> Result<RunManifest> {
    let p = prepare(args)?;
    let grid = p.loaded.config.calibration.clone();
    let mut manifest = manifest_for("calibrate", args, &p);
    manifest.grid_sha256 = Some(sha256_hex(to_toml(&grid)?.as_bytes()));

    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (number, sub) in [(1, "null"), (2, "overall")] {
        let scenario = Scenario::preset(number)?;
        let dir = args.out.join(sub);
        let (run, written) = run_into(&dir, &scenario, &p, args.threads, false)?;
        files.extend(written.into_iter().map(|f| format!("{sub}/{f}")));
        summaries.push(run.results.iter().map(|r| r.summary.clone()).collect::<Vec<_>>());
    }
    let cal = calibrate_summaries(&summaries[0], &summaries[1], &p.simulation.utility, &grid)?;
    files.push(write_csv(&args.out, "calibration.csv", &cal.table)?);
    let selected = SelectedUtility { met: cal.met, tie: cal.tie, tpr: cal.tpr, utility: cal.utility };
    files.push(write_text(&args.out, "selected_utility.toml", &to_toml(&selected)?)?);
    files.push(write_text(&args.out, "config.toml", &effective_config(&p, &ScenarioSpec::preset(1))?)?);
    manifest.finish(&args.out, &files)
}

/// Reads the calibration table written by [`calibrate`].
pub fn read_calibration(dir: &Path) -> Result<Vec<CalibrationRow>> {
    crate::tables::read_csv(dir, "calibration.csv")
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct PosteriorRow {
    pub pair: String,
    pub size: usize,
    pub eligible: bool,
    pub mean_log_hr: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct RankedRow {
    pub rank: usize,
    pub report: String,
    pub expected_utility: f64,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct PiRow {
    pub id: usize,
    pub pi: f64,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct AnalysisDecision {
    pub report: String,
    pub expected_utility: f64,
    pub p_h0: f64,
    pub p_h1: f64,
    pub horizon: f64,
    pub mean_clusters: f64,
    pub n_patients: usize,
    pub n_draws: usize,
    pub utility: UtilityConfig,
}

/// Final analysis of a roster: posterior summary, ranked reports, chosen report and per-patient π.
pub fn analyze(roster: &Path, args: &RunArgs) -> Result<RunManifest> {
    let p = prepare(args)?;
    let sim = &p.simulation;
    let panel = &sim.panel;
    let file = std::fs::File::open(roster)
        .map_err(|e| CliError::Usage(format!("{}: cannot read roster: {e}", roster.display())))?;
    let patients = read_roster(file, panel)?;
    if patients.is_empty() {
        return Err(CliError::Usage(format!("{}: roster has no patients", roster.display())));
    }
    let mut manifest = RunManifest::new("analyze", args.config.as_deref(), &p.loaded.digest, p.seed);
    manifest.threads = args.threads;

    let (fit, horizon, problem) = in_pool(args.threads, || {
        final_analysis(&patients, panel, &sim.prior, &sim.final_mcmc, derive_seed(p.seed, 0, "final"))
    })??;
    let summary = summarize(&problem, &sim.utility);
    let decision = summary.decide(&sim.utility);
    let pis = superiority_probs(&fit, &patients, sim.n_mc, &mut stream(p.seed, 0, "pi"))?;

    let out = &args.out;
    std::fs::create_dir_all(out)?;
    let posterior: Vec<PosteriorRow> = summary
        .pairs
        .iter()
        .map(|s| PosteriorRow {
            pair: panel.pair_label(s.pair),
            size: s.size,
            eligible: s.eligible,
            mean_log_hr: s.mean_log_hr,
            contribution: s.contribution,
        })
        .collect();
    let ranked: Vec<RankedRow> = decision
        .ranked
        .iter()
        .enumerate()
        .map(|(k, (r, eu))| RankedRow { rank: k + 1, report: panel.report_label(r), expected_utility: *eu })
        .collect();
    let pi: Vec<PiRow> = patients.iter().zip(&pis).map(|(q, &pi)| PiRow { id: q.id, pi }).collect();
    let chosen = AnalysisDecision {
        report: panel.report_label(&decision.report),
        expected_utility: decision.expected_utility,
        p_h0: summary.p_h0,
        p_h1: summary.p_h1,
        horizon: horizon.months(),
        mean_clusters: fit.draws.mean_clusters(),
        n_patients: patients.len(),
        n_draws: fit.draws.len(),
        utility: sim.utility,
    };
    let files = vec![
        write_csv(out, "posterior_summary.csv", &posterior)?,
        write_csv(out, "ranked_reports.csv", &ranked)?,
        write_csv(out, "pi.csv", &pi)?,
        write_csv(out, "clusters.csv", &fit.draws.cluster_records())?,
        write_text(out, "decision.json", &(serde_json::to_string_pretty(&chosen)? + "\n"))?,
    ];
    manifest.finish(out, &files)
}

pub fn print_config() -> Result<String> {
    crate::config::default_config_toml()
}

/// Reads a finished simulate/compare directory and re-derives its summary tables.
pub fn rederive(dir: &Path, panel: &basket_core::domain::Panel) -> Result<(Derived, Derived)> {
    let written = Derived::read(dir)?;
    let tables = RunTables::read(dir, &written.summary.scenario)?;
    let true_report = panel.parse_report(&written.summary.true_report)?;
    let again = tables.derive(panel, &true_report)?;
    Ok((written, again))
}
