//! Repeated trial simulation under a known truth.

pub mod comparators;
pub mod metrics;
pub mod scenario;
pub mod trial;

pub use comparators::{naive_fit, separate_fit, ArmPosteriors, ComparatorPosterior, ComparatorPriors};
pub use metrics::{mean_allocation, mean_te_error, te_errors, Method, OperatingChars};
pub use scenario::{sample_population, Interaction, Scenario, Truth, DEFAULT_POPULATION};
pub use trial::{
    final_analysis, fit_patients, horizon_of, run_trial, superiority_probs, Fit, PairAllocation, PairTe, RepResult,
    SimulationConfig,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::{DecisionSummary, UtilityConfig};
use crate::domain::{Pair, Patient, Report};
use crate::error::{invalid, Result};
use crate::seeds::stream;

/// A scenario's replicates with the truth they are judged against.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub truth: Truth,
    pub true_report: Report,
    /// Pairs with at least one patient, in panel order.
    pub pairs: Vec<Pair>,
    /// Pairs meeting the minimum subgroup size.
    pub eligible: Vec<Pair>,
    pub results: Vec<RepResult>,
}

/// The fixed population (counts only matter for the truth; order is irrelevant).
fn reference_population(truth: &Truth, config: &SimulationConfig, master: u64) -> Vec<Patient> {
    sample_population(truth, &config.panel, &mut stream(master, u64::MAX, "reference-population"))
}

/// Truth, true report, populated pairs and eligible pairs for a scenario.
pub fn truth_of(scenario: &Scenario, config: &SimulationConfig) -> Result<(Truth, Report, Vec<Pair>, Vec<Pair>)> {
    let truth = scenario.resolve(&config.panel, config.design.n_max())?;
    let patients = reference_population(&truth, config, 0);
    let (problem, _) = truth.decision_problem(&patients, &config.panel)?;
    let true_report = crate::decision::optimal_report(&problem, &config.utility).report;
    let eligible = problem.eligible(&config.utility);
    Ok((truth, true_report, problem.pairs().to_vec(), eligible))
}

/// Runs `n_reps` independent trials on the current rayon pool. Results are in replicate order
/// and do not depend on the number of threads.
pub fn simulate(scenario: &Scenario, config: &SimulationConfig, master: u64, n_reps: usize) -> Result<SimulationRun> {
    if n_reps == 0 {
        return Err(invalid("need at least one replicate"));
    }
    config.validate()?;
    let (truth, true_report, pairs, eligible) = truth_of(scenario, config)?;
    let results = (0..n_reps)
        .into_par_iter()
        .map(|r| run_trial(&truth, config, master, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationRun { truth, true_report, pairs, eligible, results })
}

impl SimulationRun {
    pub fn reports(&self) -> Vec<Report> {
        self.results.iter().map(|r| r.report.clone()).collect()
    }

    pub fn operating_characteristics(&self) -> OperatingChars {
        OperatingChars::from_reports(&self.reports(), &self.true_report, &self.eligible, &self.pairs)
    }

    /// Reports the replicates would have made under different utility weights u0, u1.
    pub fn reports_under(&self, utility: &UtilityConfig) -> Vec<Report> {
        self.results.iter().map(|r| r.summary.decide(utility).report).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationGrid {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub target_tie: f64,
    pub target_tpr: f64,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        Self {
            u0: vec![0.5, 0.8, 1.0, 1.3, 1.6, 2.0, 3.0],
            u1: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            target_tie: 0.05,
            target_tpr: 0.90,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub u0: f64,
    pub u1: f64,
    pub tie: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub utility: UtilityConfig,
    pub tie: f64,
    pub tpr: f64,
    /// False when no grid point meets both targets; `utility` is then the closest point.
    pub met: bool,
    pub table: Vec<CalibrationRow>,
}

fn rate(summaries: &[DecisionSummary], utility: &UtilityConfig, hit: impl Fn(&Report) -> bool) -> f64 {
    summaries.iter().filter(|s| hit(&s.decide(utility).report)).count() as f64 / summaries.len() as f64
}

/// Grid search over (u0, u1) with the remaining utility parameters fixed: the smallest u0 whose
/// TIE meets the target at the base u1, then the smallest u1 whose TPR meets its target
/// without breaking TIE.
pub fn calibrate_summaries(
    null_runs: &[DecisionSummary],
    overall_runs: &[DecisionSummary],
    base: &UtilityConfig,
    grid: &CalibrationGrid,
) -> Result<Calibration> {
    if grid.u0.is_empty() || grid.u1.is_empty() {
        return Err(invalid("calibration grids must be nonempty"));
    }
    if null_runs.is_empty() || overall_runs.is_empty() {
        return Err(invalid("calibration needs replicates of both scenarios"));
    }
    let mut u0s = grid.u0.clone();
    let mut u1s = grid.u1.clone();
    u0s.sort_by(f64::total_cmp);
    u1s.sort_by(f64::total_cmp);
    u0s.dedup();
    u1s.dedup();
    let at = |u0: f64, u1: f64| UtilityConfig { u0, u1, ..*base };
    let tie = |u0: f64, u1: f64| rate(null_runs, &at(u0, u1), |r| !r.is_null());
    let tpr = |u0: f64, u1: f64| rate(overall_runs, &at(u0, u1), |r| r.is_overall());

    let mut table = Vec::with_capacity(u0s.len() * u1s.len());
    for &u0 in &u0s {
        for &u1 in &u1s {
            table.push(CalibrationRow { u0, u1, tie: tie(u0, u1), tpr: tpr(u0, u1) });
        }
    }

    let chosen_u0 = u0s.iter().copied().find(|&u0| tie(u0, base.u1) <= grid.target_tie);
    let chosen = chosen_u0.and_then(|u0| {
        u1s.iter()
            .copied()
            .find(|&u1| tpr(u0, u1) >= grid.target_tpr && tie(u0, u1) <= grid.target_tie)
            .map(|u1| (u0, u1))
    });
    let (u0, u1, met) = match chosen {
        Some((u0, u1)) => (u0, u1, true),
        None => {
            let shortfall = |r: &CalibrationRow| {
                (r.tie - grid.target_tie).max(0.0).max((grid.target_tpr - r.tpr).max(0.0))
            };
            let best = table
                .iter()
                .min_by(|a, b| shortfall(a).total_cmp(&shortfall(b)))
                .expect("nonempty table");
            (best.u0, best.u1, false)
        }
    };
    Ok(Calibration { utility: at(u0, u1), tie: tie(u0, u1), tpr: tpr(u0, u1), met, table })
}

/// Simulates scenarios 1 and 2 once and calibrates u0, u1 on the stored decision summaries.
pub fn calibrate(config: &SimulationConfig, grid: &CalibrationGrid, master: u64, n_reps: usize) -> Result<Calibration> {
    let null = simulate(&Scenario::preset(1)?, config, master, n_reps)?;
    let overall = simulate(&Scenario::preset(2)?, config, master, n_reps)?;
    let summaries = |run: &SimulationRun| run.results.iter().map(|r| r.summary.clone()).collect::<Vec<_>>();
    calibrate_summaries(&summaries(&null), &summaries(&overall), &config.utility, grid)
}
