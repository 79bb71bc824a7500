//! Simulation truth: lognormal regression with treatment-by-subgroup interactions.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decision::{optimal_report, DecisionProblem, UtilityConfig};
use crate::domain::{Arm, MutationProfile, Panel, Pair, Patient, Report};
use crate::error::{invalid, Error, Result};
use crate::ppmx::truncnorm::normal_sf;
use crate::predictive::{Horizon, SURVIVAL_FLOOR};

/// Sample sizes per (aberration, tumor) for the default panel.
pub const DEFAULT_POPULATION: [[usize; 3]; 5] = [[15, 20, 5], [10, 100, 60], [50, 30, 5], [13, 25, 5], [12, 30, 20]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub mutation: String,
    pub tumor: String,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Overall treatment log-effect.
    pub beta0: f64,
    /// Additional log-effect under TT for members of the pair.
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Rows are aberrations, columns tumors.
    #[serde(default = "default_population")]
    pub population: Vec<Vec<usize>>,
}

fn default_sigma() -> f64 {
    0.2
}

fn default_population() -> Vec<Vec<usize>> {
    DEFAULT_POPULATION.iter().map(|r| r.to_vec()).collect()
}

fn interaction(mutation: &str, tumor: &str, coef: f64) -> Interaction {
    Interaction { mutation: mutation.into(), tumor: tumor.into(), coef }
}

impl Scenario {
    /// The six built-in scenarios, numbered 1 to 6.
    pub fn preset(number: usize) -> Result<Self> {
        let (beta0, interactions) = match number {
            1 => (0.0, vec![]),
            2 => (0.4, vec![]),
            3 => (0.0, vec![interaction("BRAF", "Lung", 0.4)]),
            4 => (
                0.0,
                vec![
                    interaction("PIK3CA", "BRCA", 0.3),
                    interaction("BRAF", "Lung", 0.3),
                    interaction("PTEN", "Lung", 0.4),
                ],
            ),
            5 => (
                0.0,
                vec![
                    interaction("PIK3CA", "BRCA", 0.3),
                    interaction("BRAF", "Ovary", 0.4),
                    interaction("BRAF", "Lung", 0.3),
                ],
            ),
            6 => (
                0.0,
                vec![
                    interaction("BRAF", "BRCA", 0.4),
                    interaction("BRAF", "Ovary", 0.3),
                    interaction("BRAF", "Lung", 0.4),
                ],
            ),
            _ => return Err(Error::Config(format!("no built-in scenario {number}; choose 1 to 6"))),
        };
        Ok(Self { name: format!("scenario{number}"), beta0, interactions, sigma: 0.2, population: default_population() })
    }

    pub fn total(&self) -> usize {
        self.population.iter().flatten().sum()
    }

    /// Checks the scenario against the panel and the trial size.
    pub fn resolve(&self, panel: &Panel, n_max: usize) -> Result<Truth> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.population.len() != panel.q() || self.population.iter().any(|r| r.len() != panel.n_tumors()) {
            return Err(Error::Config(format!(
                "population must be a {} x {} matrix (aberrations by tumors)",
                panel.q(),
                panel.n_tumors()
            )));
        }
        if self.total() != n_max {
            return Err(Error::Config(format!(
                "population sizes sum to {} but the trial enrolls {n_max}",
                self.total()
            )));
        }
        let effects = self
            .interactions
            .iter()
            .map(|i| Ok((panel.pair(&i.mutation, &i.tumor)?, i.coef)))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Truth { beta0: self.beta0, effects, sigma: self.sigma, population: self.population.clone() })
    }
}

/// A scenario resolved against a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub beta0: f64,
    pub effects: Vec<(Pair, f64)>,
    pub sigma: f64,
    pub population: Vec<Vec<usize>>,
}

impl Truth {
    /// Mean of log y: β0 z + Σ β_j z mc_j.
    pub fn log_mean(&self, mutations: &MutationProfile, tumor: usize, arm: Arm) -> f64 {
        if arm == Arm::Other {
            return 0.0;
        }
        self.beta0
            + self
                .effects
                .iter()
                .filter(|(p, _)| p.tumor == tumor && mutations.is_present(p.mutation))
                .map(|(_, b)| b)
                .sum::<f64>()
    }

    /// Event time for a given standard normal noise value.
    pub fn outcome_with_noise(&self, patient: &Patient, arm: Arm, noise: f64) -> f64 {
        (self.log_mean(&patient.mutations, patient.tumor, arm) + self.sigma * noise).exp()
    }

    pub fn true_outcome<R: Rng + ?Sized>(&self, patient: &Patient, arm: Arm, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.outcome_with_noise(patient, arm, z)
    }

    /// E[y] = exp(mean + σ²/2).
    pub fn expected_time(&self, mutations: &MutationProfile, tumor: usize, arm: Arm) -> f64 {
        (self.log_mean(mutations, tumor, arm) + 0.5 * self.sigma * self.sigma).exp()
    }

    pub fn survival(&self, mutations: &MutationProfile, tumor: usize, arm: Arm, t: f64) -> f64 {
        normal_sf((t.ln() - self.log_mean(mutations, tumor, arm)) / self.sigma)
    }

    pub fn average_hazard(&self, mutations: &MutationProfile, tumor: usize, arm: Arm, horizon: Horizon) -> f64 {
        let t = horizon.months();
        -self.survival(mutations, tumor, arm, t).max(SURVIVAL_FLOOR).ln() / t
    }

    /// Third quartile of the event-time distribution of the population under 1:1 randomization.
    pub fn horizon(&self, patients: &[Patient]) -> Result<Horizon> {
        if patients.is_empty() {
            return Err(invalid("empty population"));
        }
        let marginal_sf = |t: f64| {
            patients
                .iter()
                .map(|p| {
                    0.5 * (self.survival(&p.mutations, p.tumor, Arm::Other, t)
                        + self.survival(&p.mutations, p.tumor, Arm::Targeted, t))
                })
                .sum::<f64>()
                / patients.len() as f64
        };
        let (mut lo, mut hi) = (1e-6f64, 1.0f64);
        while marginal_sf(hi) > 0.25 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if marginal_sf(mid) > 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Horizon::new(0.5 * (lo + hi))
    }

    /// The decision problem with θ fixed at the truth (a single draw).
    pub fn decision_problem(&self, patients: &[Patient], panel: &Panel) -> Result<(DecisionProblem, Horizon)> {
        let horizon = self.horizon(patients)?;
        let problem = DecisionProblem::from_hazard_fn(patients, panel, |(m, c), arm| {
            self.average_hazard(m, *c, arm, horizon)
        })?;
        Ok((problem, horizon))
    }

    /// A_true: the report maximizing the utility under the truth.
    pub fn true_report(&self, patients: &[Patient], panel: &Panel, utility: &UtilityConfig) -> Result<Report> {
        let (problem, _) = self.decision_problem(patients, panel)?;
        Ok(optimal_report(&problem, utility).report)
    }
}

/// Patients with exactly one targeted aberration each, per-pair counts as configured,
/// in a seeded random enrollment order. Ids are 1-based enrollment positions.
pub fn sample_population<R: Rng + ?Sized>(truth: &Truth, panel: &Panel, rng: &mut R) -> Vec<Patient> {
    let mut patients = Vec::with_capacity(truth.population.iter().flatten().sum());
    for (j, row) in truth.population.iter().enumerate() {
        for (c, &n) in row.iter().enumerate() {
            for _ in 0..n {
                patients.push(Patient::new(0, MutationProfile::single(panel.q(), j), c));
            }
        }
    }
    patients.shuffle(rng);
    for (k, p) in patients.iter_mut().enumerate() {
        p.id = k + 1;
    }
    patients
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::subgroup_size;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn population_matches_table() {
        let panel = Panel::impact2();
        let truth = Scenario::preset(1).unwrap().resolve(&panel, 400).unwrap();
        let pop = sample_population(&truth, &panel, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(pop.len(), 400);
        assert_eq!(subgroup_size(&pop, panel.pair("BRAF", "Ovary").unwrap()), 100);
        let other = sample_population(&truth, &panel, &mut ChaCha8Rng::seed_from_u64(2));
        assert_ne!(pop, other);
    }

    #[test]
    fn log_means() {
        let panel = Panel::impact2();
        let s4 = Scenario::preset(4).unwrap().resolve(&panel, 400).unwrap();
        let pik_brca = MutationProfile::single(5, panel.aberration_index("PIK3CA").unwrap());
        let brca = panel.tumor_index("BRCA").unwrap();
        assert_eq!(s4.log_mean(&pik_brca, brca, Arm::Targeted), 0.3);
        assert_eq!(s4.log_mean(&pik_brca, brca, Arm::Other), 0.0);
        let s2 = Scenario::preset(2).unwrap().resolve(&panel, 400).unwrap();
        assert_eq!(s2.log_mean(&pik_brca, 2, Arm::Targeted), 0.4);
    }

    #[test]
    fn rejects_bad_population() {
        let panel = Panel::impact2();
        assert!(Scenario::preset(1).unwrap().resolve(&panel, 399).is_err());
        assert!(Scenario::preset(7).is_err());
    }

    #[test]
    fn horizon_is_third_quartile() {
        let panel = Panel::impact2();
        let truth = Scenario::preset(1).unwrap().resolve(&panel, 400).unwrap();
        let pop = sample_population(&truth, &panel, &mut ChaCha8Rng::seed_from_u64(1));
        let h = truth.horizon(&pop).unwrap().months();
        assert!((h - (0.2 * 0.674_489_750_196_081_7f64).exp()).abs() < 1e-9);
    }
}
