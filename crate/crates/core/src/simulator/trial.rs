//! One simulated trial: run-in, cohort-wise refits with adaptive allocation, final analysis.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::comparators::{naive_fit, separate_fit, ArmPosteriors, ComparatorPriors};
use super::scenario::{sample_population, Truth};
use crate::allocation::{assign_arm, trial_schedule, AllocationRecord, AllocationStream, DesignConfig, Phase};
use crate::decision::{summarize, DecisionProblem, DecisionSummary, UtilityConfig};
use crate::domain::{pair_membership, Arm, MutationProfile, Outcome, Panel, Pair, Patient, Report};
use crate::error::{invalid, Result};
use crate::ppmx::{encode, mcmc_run, AnalysisData, Cohesion, McmcSettings, ModelConfig, PosteriorDraws, PriorSettings};
use crate::predictive::{compute_horizon, predictive_mean, superiority_from_mixtures, Horizon, PredictiveMixture};
use crate::seeds::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub panel: Panel,
    pub design: DesignConfig,
    pub utility: UtilityConfig,
    pub interim_mcmc: McmcSettings,
    pub final_mcmc: McmcSettings,
    /// Monte Carlo pairs per superiority probability.
    pub n_mc: usize,
    pub prior: PriorSettings,
    /// Accrual spreads evenly over this many months.
    pub accrual_months: f64,
    /// With `false`, every patient is randomized 1:1 and no interim refits run.
    pub adaptive: bool,
    /// With `false`, every enrolled patient's event time is known at every analysis.
    pub censoring: bool,
    pub comparators: ComparatorPriors,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            panel: Panel::impact2(),
            design: DesignConfig::default(),
            utility: UtilityConfig::default(),
            interim_mcmc: McmcSettings { iterations: 1000, burn_in: 500, thin: 5 },
            final_mcmc: McmcSettings { iterations: 4000, burn_in: 2000, thin: 5 },
            n_mc: 4000,
            prior: PriorSettings::default(),
            accrual_months: 24.0,
            adaptive: true,
            censoring: true,
            comparators: ComparatorPriors::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.panel.validate()?;
        self.design.validate()?;
        self.utility.validate()?;
        self.interim_mcmc.validate()?;
        self.final_mcmc.validate()?;
        self.comparators.validate()?;
        self.prior.similarity(&self.panel)?;
        Cohesion::new(self.prior.mass)?;
        if self.n_mc == 0 {
            return Err(invalid("n_mc must be at least 1"));
        }
        if !(self.accrual_months > 0.0 && self.accrual_months.is_finite()) {
            return Err(invalid("accrual_months must be positive"));
        }
        Ok(())
    }
}

/// Posterior draws with the model they were fit under.
#[derive(Debug, Clone)]
pub struct Fit {
    pub draws: PosteriorDraws,
    pub model: ModelConfig,
}

/// Fits the PPMx model to patients with assigned arms and (possibly missing) outcomes.
pub fn fit_patients(
    patients: &[Patient],
    panel: &Panel,
    prior: &PriorSettings,
    settings: &McmcSettings,
    seed: u64,
) -> Result<Fit> {
    let covariates = patients.iter().map(|p| encode(&p.mutations, p.tumor, p.arm())).collect();
    let outcomes = patients.iter().map(|p| p.outcome()).collect();
    let data = AnalysisData::new(covariates, outcomes)?;
    let model = prior.model(panel, &data)?;
    let draws = mcmc_run(&data, settings, seed, &model)?;
    Ok(Fit { draws, model })
}

/// π for every distinct (mutations, tumor) profile among `patients`, each patient getting its
/// own Monte Carlo estimate.
pub fn superiority_probs<R: Rng + ?Sized>(fit: &Fit, patients: &[Patient], n_mc: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut cache: Vec<((MutationProfile, usize), Vec<PredictiveMixture>, Vec<PredictiveMixture>)> = Vec::new();
    let mut out = Vec::with_capacity(patients.len());
    for p in patients {
        let key = (p.mutations.clone(), p.tumor);
        let idx = match cache.iter().position(|(k, _, _)| *k == key) {
            Some(i) => i,
            None => {
                let mix = |arm| {
                    let q = encode(&p.mutations, p.tumor, Some(arm));
                    fit.draws.draws.iter().map(|d| PredictiveMixture::new(d, &q, &fit.model)).collect::<Vec<_>>()
                };
                cache.push((key, mix(Arm::Targeted), mix(Arm::Other)));
                cache.len() - 1
            }
        };
        out.push(superiority_from_mixtures(&cache[idx].1, &cache[idx].2, rng, n_mc)?);
    }
    Ok(out)
}

/// Outcome as seen at calendar time `now` by a patient who entered at `entry`.
fn observed(time: f64, entry: f64, now: f64, censoring: bool) -> Result<Option<Outcome>> {
    if !censoring {
        return Outcome::event(time).map(Some);
    }
    let on_study = now - entry;
    if on_study <= 0.0 {
        Ok(None)
    } else if time <= on_study {
        Outcome::event(time).map(Some)
    } else {
        Outcome::new(on_study, true).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAllocation {
    pub pair: Pair,
    pub n: usize,
    pub n_targeted: usize,
}

impl PairAllocation {
    pub fn fraction(&self) -> Option<f64> {
        (self.n > 0).then(|| self.n_targeted as f64 / self.n as f64)
    }
}

/// True and estimated expected event times at a pair's canonical covariate profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTe {
    pub pair: Pair,
    pub true_other: f64,
    pub true_targeted: f64,
    pub ours_other: f64,
    pub ours_targeted: f64,
    pub naive: ArmPosteriors,
    pub separate: Option<ArmPosteriors>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub replicate: usize,
    pub seed: u64,
    pub report: Report,
    pub summary: DecisionSummary,
    pub horizon: f64,
    pub n_censored: usize,
    pub mean_clusters: f64,
    pub allocation: Vec<PairAllocation>,
    pub records: Vec<AllocationRecord>,
    pub te: Vec<PairTe>,
}

/// Enrollment times evenly spread over the accrual period.
fn entry_times(n: usize, accrual: f64) -> Vec<f64> {
    (0..n).map(|i| accrual * i as f64 / n as f64).collect()
}

pub fn run_trial(truth: &Truth, config: &SimulationConfig, master: u64, replicate: usize) -> Result<RepResult> {
    let rep = replicate as u64;
    let panel = &config.panel;
    let design = &config.design;
    let n_max = design.n_max();

    let mut pop_rng = stream(master, rep, "population");
    let mut patients = sample_population(truth, panel, &mut pop_rng);
    if patients.len() != n_max {
        return Err(invalid(format!("population has {} patients, design needs {n_max}", patients.len())));
    }
    let noise: Vec<f64> = (0..n_max).map(|_| pop_rng.sample(StandardNormal)).collect();
    let entry = entry_times(n_max, config.accrual_months);
    let final_time = config.accrual_months + design.follow_up;
    let potential = |i: usize, p: &Patient, arm: Arm| truth.outcome_with_noise(p, arm, noise[i]);

    let mut alloc = AllocationStream::new(derive_seed(master, rep, "allocation"));
    let mut records = Vec::with_capacity(n_max);
    let schedule = if config.adaptive { trial_schedule(design) } else { Vec::new() };

    for i in 0..design.n_run_in.min(n_max) {
        let rec = assign_arm(patients[i].id, Phase::RunIn, None, design, &mut alloc)?;
        patients[i].assign(rec.arm)?;
        records.push(rec);
    }
    let mut enrolled = design.n_run_in.min(n_max);
    if config.adaptive {
        for (k, &at) in schedule.iter().enumerate() {
            debug_assert_eq!(at, enrolled);
            let now = config.accrual_months * at as f64 / n_max as f64;
            let mut current: Vec<Patient> = patients[..at].to_vec();
            for (i, p) in current.iter_mut().enumerate() {
                let y = potential(i, p, p.arm().expect("enrolled patients are assigned"));
                p.set_outcome(observed(y, entry[i], now, config.censoring)?);
            }
            let purpose = format!("interim-{k}");
            let fit = fit_patients(&current, panel, &config.prior, &config.interim_mcmc, derive_seed(master, rep, &purpose))?;
            let end = (at + design.cohort).min(n_max);
            let mut pi_rng = stream(master, rep, &format!("pi-{k}"));
            let pis = superiority_probs(&fit, &patients[at..end], config.n_mc, &mut pi_rng)?;
            for (i, pi) in (at..end).zip(pis) {
                let rec = assign_arm(patients[i].id, Phase::Adaptive, Some(pi), design, &mut alloc)?;
                patients[i].assign(rec.arm)?;
                records.push(rec);
            }
            enrolled = end;
        }
    } else {
        for i in enrolled..n_max {
            let rec = assign_arm(patients[i].id, Phase::Adaptive, Some(0.5), design, &mut alloc)?;
            patients[i].assign(rec.arm)?;
            records.push(rec);
        }
        enrolled = n_max;
    }
    if enrolled != n_max {
        return Err(invalid("design schedule does not enroll every patient"));
    }

    for i in 0..n_max {
        let y = potential(i, &patients[i], patients[i].arm().expect("assigned"));
        let o = observed(y, entry[i], final_time, config.censoring)?;
        patients[i].set_outcome(o);
    }
    let n_censored = patients.iter().filter(|p| p.outcome().is_some_and(|o| o.censored())).count();
    let (fit, horizon, problem) =
        final_analysis(&patients, panel, &config.prior, &config.final_mcmc, derive_seed(master, rep, "final"))?;
    let summary = summarize(&problem, &config.utility);
    let report = summary.decide(&config.utility).report;

    let allocation = panel
        .all_pairs()
        .into_iter()
        .map(|pair| {
            let members = patients.iter().filter(|p| pair_membership(p, pair));
            let (n, n_targeted) = members.fold((0, 0), |(n, t), p| (n + 1, t + usize::from(p.arm() == Some(Arm::Targeted))));
            PairAllocation { pair, n, n_targeted }
        })
        .collect();

    let comparison = comparator_trial(&patients, &noise, &entry, final_time, truth, config, master, rep)?;
    let naive = naive_fit(&comparison, &config.comparators)?;
    let separate = separate_fit(&comparison, panel, &config.comparators)?;
    let te = panel
        .all_pairs()
        .into_iter()
        .filter(|&pair| patients.iter().any(|p| pair_membership(p, pair)))
        .map(|pair| {
            let x = MutationProfile::single(panel.q(), pair.mutation);
            let ours = |arm| predictive_mean(&fit.draws.draws, &encode(&x, pair.tumor, Some(arm)), &fit.model);
            PairTe {
                pair,
                true_other: truth.expected_time(&x, pair.tumor, Arm::Other),
                true_targeted: truth.expected_time(&x, pair.tumor, Arm::Targeted),
                ours_other: ours(Arm::Other),
                ours_targeted: ours(Arm::Targeted),
                naive,
                separate: separate[pair.mutation],
            }
        })
        .collect();

    Ok(RepResult {
        replicate,
        seed: derive_seed(master, rep, "replicate"),
        report,
        summary,
        horizon: horizon.months(),
        n_censored,
        mean_clusters: fit.draws.mean_clusters(),
        allocation,
        records,
        te,
    })
}

/// The same patients and noise, randomized 1:1 and observed at the final analysis.
#[allow(clippy::too_many_arguments)]
fn comparator_trial(
    patients: &[Patient],
    noise: &[f64],
    entry: &[f64],
    final_time: f64,
    truth: &Truth,
    config: &SimulationConfig,
    master: u64,
    rep: u64,
) -> Result<Vec<Patient>> {
    let mut coin = AllocationStream::new(derive_seed(master, rep, "comparator-allocation"));
    patients
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let rec = assign_arm(p.id, Phase::RunIn, None, &config.design, &mut coin)?;
            let mut q = Patient::new(p.id, p.mutations.clone(), p.tumor);
            q.assign(rec.arm)?;
            let y = truth.outcome_with_noise(&q, rec.arm, noise[i]);
            q.set_outcome(observed(y, entry[i], final_time, config.censoring)?);
            Ok(q)
        })
        .collect()
}

pub fn horizon_of(patients: &[Patient]) -> Result<Horizon> {
    let times: Vec<f64> = patients.iter().filter_map(|p| p.outcome()).map(|o| o.time()).collect();
    compute_horizon(&times)
}

/// Fits the final model and evaluates every candidate report.
pub fn final_analysis(
    patients: &[Patient],
    panel: &Panel,
    prior: &PriorSettings,
    settings: &McmcSettings,
    seed: u64,
) -> Result<(Fit, Horizon, DecisionProblem)> {
    let fit = fit_patients(patients, panel, prior, settings, seed)?;
    let horizon = horizon_of(patients)?;
    let problem = DecisionProblem::from_posterior(&fit.draws.draws, patients, panel, &fit.model, horizon)?;
    Ok((fit, horizon, problem))
}
