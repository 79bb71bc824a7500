//! Utility-based choice of the subpopulation report.
//!
//! A report is A0 (nothing), A1 (everyone) or a set of mutation–tumor pairs. Its utility
//! under a parameter draw depends on the draw's pair-wise log hazard ratios: A0 pays u0 when
//! there is no effect anywhere (H0), A1 pays u1 when the effect is common and positive (H1),
//! and otherwise each reported pair pays (log HR − β) times a size weight.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{pair_membership, Arm, MutationProfile, Panel, Pair, Patient, Report};
use crate::error::{invalid, Result};
use crate::ppmx::{encode, Draw, ModelConfig};
use crate::predictive::{ratio_of_hazards, Horizon, PredictiveMixture};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityConfig {
    pub u0: f64,
    pub u1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub min_size: usize,
    /// Half-width of the H0 band on |log HR|.
    pub eps0: f64,
    /// Allowed spread of log HR across pairs under H1.
    pub eps1: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self { u0: 1.3, u1: 20.0, alpha: 0.125, beta: 0.4, min_size: 5, eps0: 0.1, eps1: 2.0 }
    }
}

impl UtilityConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.u0 > 0.0
            && self.u1 > 0.0
            && (0.0..=1.0).contains(&self.alpha)
            && self.beta > 0.0
            && self.min_size >= 1
            && self.eps0 > 0.0
            && self.eps1 > 0.0;
        if !ok {
            return Err(invalid(format!("invalid utility configuration {self:?}")));
        }
        Ok(())
    }
}

/// f_α: zero below `min_size`, n^α otherwise.
pub fn size_penalty(n: usize, alpha: f64, min_size: usize) -> f64 {
    if n < min_size {
        0.0
    } else {
        (n as f64).powf(alpha)
    }
}

/// No effect anywhere: every |log HR| within eps0.
pub fn h0_member(log_hrs: &[f64], eps0: f64) -> bool {
    log_hrs.iter().all(|l| l.abs() <= eps0)
}

/// Common positive effect: log HRs within eps1 of each other and all above eps0.
pub fn h1_member(log_hrs: &[f64], eps0: f64, eps1: f64) -> bool {
    if log_hrs.is_empty() {
        return false;
    }
    let (lo, hi) = log_hrs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    hi - lo <= eps1 && lo > eps0
}

/// Pair-wise log hazard ratios under each parameter draw, for every pair with n(a) > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProblem {
    pairs: Vec<Pair>,
    sizes: Vec<usize>,
    /// `log_hr[d][k]` for draw d and pair `pairs[k]`.
    log_hr: Vec<Vec<f64>>,
}

impl DecisionProblem {
    pub fn new(pairs: Vec<Pair>, sizes: Vec<usize>, log_hr: Vec<Vec<f64>>) -> Result<Self> {
        if pairs.len() != sizes.len() {
            return Err(invalid("pairs and sizes differ in length"));
        }
        if sizes.contains(&0) {
            return Err(invalid("every pair in a decision problem needs n(a) > 0"));
        }
        if log_hr.is_empty() {
            return Err(invalid("need at least one draw"));
        }
        if log_hr.iter().any(|row| row.len() != pairs.len() || row.iter().any(|v| v.is_nan())) {
            return Err(invalid("every draw needs one finite-or-infinite log HR per pair"));
        }
        let mut sorted = pairs.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != pairs.len() {
            return Err(invalid("duplicate pair in decision problem"));
        }
        Ok(Self { pairs, sizes, log_hr })
    }

    /// Hazard ratios from posterior draws, averaging the average hazard over each subgroup's
    /// members (arm overridden to O and to TT).
    pub fn from_posterior(
        draws: &[Draw],
        patients: &[Patient],
        panel: &Panel,
        model: &ModelConfig,
        horizon: Horizon,
    ) -> Result<Self> {
        let groups = SubgroupProfiles::new(patients, panel);
        let log_hr = draws
            .iter()
            .map(|d| {
                groups.log_hazard_ratios(|profile, arm| {
                    PredictiveMixture::new(d, &encode(&profile.0, profile.1, Some(arm)), model).average_hazard(horizon)
                })
            })
            .collect();
        Self::new(groups.pairs.clone(), groups.sizes.clone(), log_hr)
    }

    /// Single-draw problem from a known average-hazard function of (profile, arm).
    pub fn from_hazard_fn(
        patients: &[Patient],
        panel: &Panel,
        average_hazard: impl Fn(&(MutationProfile, usize), Arm) -> f64,
    ) -> Result<Self> {
        let groups = SubgroupProfiles::new(patients, panel);
        let row = groups.log_hazard_ratios(average_hazard);
        Self::new(groups.pairs.clone(), groups.sizes.clone(), vec![row])
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn log_hr(&self) -> &[Vec<f64>] {
        &self.log_hr
    }

    pub fn n_draws(&self) -> usize {
        self.log_hr.len()
    }

    fn index(&self, pair: &Pair) -> Option<usize> {
        self.pairs.iter().position(|p| p == pair)
    }

    pub fn size_of(&self, pair: &Pair) -> usize {
        self.index(pair).map_or(0, |k| self.sizes[k])
    }

    pub fn eligible(&self, config: &UtilityConfig) -> Vec<Pair> {
        self.pairs
            .iter()
            .zip(&self.sizes)
            .filter(|(_, &n)| n >= config.min_size)
            .map(|(p, _)| *p)
            .collect()
    }
}

/// Unique covariate profiles of each subgroup's members.
struct SubgroupProfiles {
    pairs: Vec<Pair>,
    sizes: Vec<usize>,
    profiles: Vec<(MutationProfile, usize)>,
    /// For each pair: (profile index, member count).
    members: Vec<Vec<(usize, usize)>>,
}

impl SubgroupProfiles {
    fn new(patients: &[Patient], panel: &Panel) -> Self {
        let mut profile_index: BTreeMap<(MutationProfile, usize), usize> = BTreeMap::new();
        let mut profiles = Vec::new();
        let mut pairs = Vec::new();
        let mut sizes = Vec::new();
        let mut members = Vec::new();
        for pair in panel.all_pairs() {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for p in patients.iter().filter(|p| pair_membership(p, pair)) {
                let key = (p.mutations.clone(), p.tumor);
                let next = profiles.len();
                let idx = *profile_index.entry(key.clone()).or_insert_with(|| {
                    profiles.push(key);
                    next
                });
                *counts.entry(idx).or_default() += 1;
            }
            let n: usize = counts.values().sum();
            if n > 0 {
                pairs.push(pair);
                sizes.push(n);
                members.push(counts.into_iter().collect());
            }
        }
        Self { pairs, sizes, profiles, members }
    }

    fn log_hazard_ratios(&self, average_hazard: impl Fn(&(MutationProfile, usize), Arm) -> f64) -> Vec<f64> {
        let ah: Vec<[f64; 2]> = self
            .profiles
            .iter()
            .map(|p| [average_hazard(p, Arm::Other), average_hazard(p, Arm::Targeted)])
            .collect();
        self.members
            .iter()
            .zip(&self.sizes)
            .map(|(m, &n)| {
                let mut o = 0.0;
                let mut tt = 0.0;
                for &(idx, count) in m {
                    o += ah[idx][0] * count as f64;
                    tt += ah[idx][1] * count as f64;
                }
                ratio_of_hazards(o / n as f64, tt / n as f64).ln()
            })
            .collect()
    }
}

/// u(report, θ) for draw `d` of the problem.
pub fn utility(report: &Report, problem: &DecisionProblem, d: usize, config: &UtilityConfig) -> Result<f64> {
    let row = problem.log_hr.get(d).ok_or_else(|| invalid(format!("draw {d} out of range")))?;
    if h0_member(row, config.eps0) {
        return Ok(if report.is_null() { config.u0 } else { 0.0 });
    }
    if h1_member(row, config.eps0, config.eps1) {
        return Ok(if report.is_overall() { config.u1 } else { 0.0 });
    }
    let mut total = 0.0;
    for pair in report.pair_list() {
        let k = problem
            .index(&pair)
            .ok_or_else(|| invalid(format!("reported pair {pair} has no patients")))?;
        total += (row[k] - config.beta) * size_penalty(problem.sizes[k], config.alpha, config.min_size);
    }
    Ok(total)
}

/// Posterior mean utility over the problem's draws.
pub fn expected_utility(report: &Report, problem: &DecisionProblem, config: &UtilityConfig) -> Result<f64> {
    let mut total = 0.0;
    for d in 0..problem.n_draws() {
        total += utility(report, problem, d, config)?;
    }
    Ok(total / problem.n_draws() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pair: Pair,
    pub size: usize,
    pub eligible: bool,
    /// E[(log HR − β) f_α ; θ ∉ H0 ∪ H1].
    pub contribution: f64,
    pub mean_log_hr: f64,
}

/// Expected-utility summaries sufficient to pick the report for any (u0, u1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub p_h0: f64,
    pub p_h1: f64,
    pub pairs: Vec<PairSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub report: Report,
    pub expected_utility: f64,
    pub summary: DecisionSummary,
    /// Candidate reports (A0, A1, the best pair set, every eligible singleton) by expected utility.
    pub ranked: Vec<(Report, f64)>,
}

pub fn summarize(problem: &DecisionProblem, config: &UtilityConfig) -> DecisionSummary {
    let n_draws = problem.n_draws() as f64;
    let mut h0 = 0usize;
    let mut h1 = 0usize;
    let mut contrib = vec![0.0; problem.pairs.len()];
    let mut mean = vec![0.0; problem.pairs.len()];
    let weights: Vec<f64> = problem
        .sizes
        .iter()
        .map(|&n| size_penalty(n, config.alpha, config.min_size))
        .collect();
    for row in &problem.log_hr {
        for (m, l) in mean.iter_mut().zip(row) {
            *m += l;
        }
        if h0_member(row, config.eps0) {
            h0 += 1;
        } else if h1_member(row, config.eps0, config.eps1) {
            h1 += 1;
        } else {
            for k in 0..row.len() {
                contrib[k] += (row[k] - config.beta) * weights[k];
            }
        }
    }
    DecisionSummary {
        p_h0: h0 as f64 / n_draws,
        p_h1: h1 as f64 / n_draws,
        pairs: problem
            .pairs
            .iter()
            .enumerate()
            .map(|(k, &pair)| PairSummary {
                pair,
                size: problem.sizes[k],
                eligible: problem.sizes[k] >= config.min_size,
                contribution: contrib[k] / n_draws,
                mean_log_hr: mean[k] / n_draws,
            })
            .collect(),
    }
}

/// Tie-break rank: A0 before A1 before pair sets; smaller sets first, then lexicographic.
fn candidate_order(a: &Report, b: &Report) -> Ordering {
    fn kind(r: &Report) -> u8 {
        match r {
            Report::Null => 0,
            Report::Overall => 1,
            Report::Pairs(_) => 2,
        }
    }
    kind(a)
        .cmp(&kind(b))
        .then_with(|| a.pair_list().len().cmp(&b.pair_list().len()))
        .then_with(|| a.pair_list().cmp(&b.pair_list()))
}

/// Best report by expected utility, higher value first, ties by [`candidate_order`].
fn better(a: (&Report, f64), b: (&Report, f64)) -> bool {
    match a.1.partial_cmp(&b.1) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => candidate_order(a.0, b.0) == Ordering::Less,
    }
}

impl DecisionSummary {
    /// Bayes rule given the summaries. By additivity the best pair set is exactly the set of
    /// eligible pairs with positive expected contribution.
    pub fn decide(&self, config: &UtilityConfig) -> Decision {
        let eu0 = config.u0 * self.p_h0;
        let eu1 = config.u1 * self.p_h1;
        let positive: Vec<&PairSummary> =
            self.pairs.iter().filter(|p| p.eligible && p.contribution > 0.0).collect();

        let mut ranked = vec![(Report::Null, eu0), (Report::Overall, eu1)];
        if !positive.is_empty() {
            let set = Report::pairs(positive.iter().map(|p| p.pair)).expect("nonempty, distinct");
            let eu: f64 = positive.iter().map(|p| p.contribution).sum();
            ranked.push((set, eu));
        }
        let mut best = 0;
        for k in 1..ranked.len() {
            if better((&ranked[k].0, ranked[k].1), (&ranked[best].0, ranked[best].1)) {
                best = k;
            }
        }
        let (report, expected_utility) = ranked[best].clone();

        for p in self.pairs.iter().filter(|p| p.eligible) {
            let single = Report::pairs([p.pair]).expect("one pair");
            if !ranked.iter().any(|(r, _)| *r == single) {
                ranked.push((single, p.contribution));
            }
        }
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| candidate_order(&a.0, &b.0))
        });

        Decision { report, expected_utility, summary: self.clone(), ranked }
    }
}

/// argmax over A0, A1 and every nonempty subset of the eligible pairs.
pub fn optimal_report(problem: &DecisionProblem, config: &UtilityConfig) -> Decision {
    summarize(problem, config).decide(config)
}

/// Exhaustive search over all 2^k − 1 pair sets plus A0 and A1, each scored draw by draw.
/// Exponential; intended for verifying [`optimal_report`] on small problems.
pub fn brute_force_report(problem: &DecisionProblem, config: &UtilityConfig) -> Result<(Report, f64)> {
    let eligible = problem.eligible(config);
    if eligible.len() > 20 {
        return Err(invalid("too many eligible pairs for exhaustive search"));
    }
    let mut best = (Report::Null, expected_utility(&Report::Null, problem, config)?);
    let overall = expected_utility(&Report::Overall, problem, config)?;
    if better((&Report::Overall, overall), (&best.0, best.1)) {
        best = (Report::Overall, overall);
    }
    for mask in 1u32..(1 << eligible.len()) {
        let set = Report::pairs(
            eligible
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, p)| *p),
        )?;
        let eu = expected_utility(&set, problem, config)?;
        if better((&set, eu), (&best.0, best.1)) {
            best = (set, eu);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem(rows: Vec<Vec<f64>>, sizes: Vec<usize>) -> DecisionProblem {
        let pairs = (0..sizes.len()).map(|k| Pair::new(k, 0)).collect();
        DecisionProblem::new(pairs, sizes, rows).unwrap()
    }

    #[test]
    fn penalty() {
        assert_eq!(size_penalty(4, 0.125, 5), 0.0);
        assert_relative_eq!(size_penalty(5, 0.125, 5), 5f64.powf(0.125));
        assert_relative_eq!(size_penalty(5, 0.125, 5), 1.2228, epsilon = 1e-4);
        assert_eq!(size_penalty(100, 0.0, 5), 1.0);
    }

    #[test]
    fn hypotheses() {
        assert!(h0_member(&[0.0, 0.0], 1e-9));
        assert!(!h0_member(&[0.4, 0.0], 0.05));
        assert!(h0_member(&[0.04, -0.04], 0.05));
        assert!(h1_member(&[0.4, 0.4], 0.05, 0.05));
        assert!(!h1_member(&[0.4, 0.0], 0.05, 0.05));
        assert!(!h1_member(&[0.0, 0.0], 0.05, 0.05));
    }

    #[test]
    fn utility_branches() {
        let c = UtilityConfig::default();
        let null = problem(vec![vec![0.0, 0.0]], vec![10, 20]);
        assert_eq!(utility(&Report::Null, &null, 0, &c).unwrap(), 1.3);
        assert_eq!(utility(&Report::Overall, &null, 0, &c).unwrap(), 0.0);
        let common = problem(vec![vec![0.4, 0.4]], vec![10, 20]);
        assert_eq!(utility(&Report::Overall, &common, 0, &c).unwrap(), 20.0);
        let mixed = problem(vec![vec![0.4, 0.0]], vec![10, 20]);
        let a = Report::pairs([Pair::new(0, 0)]).unwrap();
        assert_eq!(utility(&a, &mixed, 0, &c).unwrap(), 0.0);
        assert_eq!(utility(&Report::Null, &mixed, 0, &c).unwrap(), 0.0);
        let missing = Report::pairs([Pair::new(7, 0)]).unwrap();
        assert!(utility(&missing, &mixed, 0, &c).is_err());
    }

    #[test]
    fn expected_utility_mixture_and_additivity() {
        let c = UtilityConfig::default();
        let p = problem(vec![vec![0.0, 0.0], vec![0.5, 0.5]], vec![10, 20]);
        assert_relative_eq!(expected_utility(&Report::Null, &p, &c).unwrap(), 0.65);
        let p = problem(vec![vec![1.0, -0.3], vec![0.2, 0.9], vec![0.0, 0.0]], vec![10, 20]);
        let a = Report::pairs([Pair::new(0, 0)]).unwrap();
        let b = Report::pairs([Pair::new(1, 0)]).unwrap();
        let ab = Report::pairs([Pair::new(0, 0), Pair::new(1, 0)]).unwrap();
        let sum = expected_utility(&a, &p, &c).unwrap() + expected_utility(&b, &p, &c).unwrap();
        assert_relative_eq!(expected_utility(&ab, &p, &c).unwrap(), sum, epsilon = 1e-12);
    }

    #[test]
    fn optimal_simple_cases() {
        let c = UtilityConfig::default();
        let null = problem(vec![vec![0.0, 0.01]; 4], vec![10, 20]);
        assert_eq!(optimal_report(&null, &c).report, Report::Null);
        let common = problem(vec![vec![0.4, 0.4]; 4], vec![10, 20]);
        assert_eq!(optimal_report(&common, &c).report, Report::Overall);
        let one = problem(vec![vec![1.5, 0.0]; 4], vec![10, 20]);
        assert_eq!(optimal_report(&one, &c).report, Report::pairs([Pair::new(0, 0)]).unwrap());
    }

    #[test]
    fn ineligible_pairs_never_reported() {
        let c = UtilityConfig::default();
        let p = problem(vec![vec![3.0, 0.0]; 2], vec![4, 20]);
        let d = optimal_report(&p, &c);
        assert_eq!(d.report, Report::Null);
        assert!(!d.summary.pairs[0].eligible);
    }

    #[test]
    fn ranked_table_starts_with_choice() {
        let c = UtilityConfig::default();
        let p = problem(vec![vec![1.5, 0.9, -0.2]; 3], vec![10, 20, 30]);
        let d = optimal_report(&p, &c);
        assert_eq!(d.ranked[0].0, d.report);
        assert_eq!(d.report, Report::pairs([Pair::new(0, 0), Pair::new(1, 0)]).unwrap());
        assert!(d.ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}
