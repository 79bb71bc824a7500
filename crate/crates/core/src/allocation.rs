//! Treatment assignment: equal randomization during the run-in, then clamped adaptive
//! randomization driven by the superiority probability from the latest cohort refit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Arm;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    /// Run-in size n0.
    pub n_run_in: usize,
    /// Adaptive-phase size n1.
    pub n_adaptive: usize,
    /// Patients per cohort between refits.
    pub cohort: usize,
    /// Lower clamp p0.
    pub p_low: f64,
    /// Upper clamp p1.
    pub p_high: f64,
    /// Months after the last accrual before the final analysis.
    pub follow_up: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self { n_run_in: 100, n_adaptive: 300, cohort: 50, p_low: 0.1, p_high: 0.9, follow_up: 6.0 }
    }
}

impl DesignConfig {
    pub fn n_max(&self) -> usize {
        self.n_run_in + self.n_adaptive
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p_low && self.p_low <= self.p_high && self.p_high < 1.0) {
            return Err(invalid(format!("need 0 < p_low <= p_high < 1, got ({}, {})", self.p_low, self.p_high)));
        }
        if self.n_adaptive > 0 && (self.cohort == 0 || self.n_adaptive % self.cohort != 0) {
            return Err(invalid(format!(
                "cohort size {} must divide the adaptive phase size {}",
                self.cohort, self.n_adaptive
            )));
        }
        if self.n_max() == 0 {
            return Err(invalid("trial must enroll at least one patient"));
        }
        if !(self.follow_up >= 0.0) {
            return Err(invalid("follow-up must be nonnegative"));
        }
        Ok(())
    }
}

/// P(TT) as a function of π: π clamped to [p_low, p_high].
pub fn allocation_prob(pi: f64, config: &DesignConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(invalid(format!("superiority probability must lie in [0, 1], got {pi}")));
    }
    Ok(if pi < config.p_low {
        config.p_low
    } else if pi > config.p_high {
        config.p_high
    } else {
        pi
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    RunIn,
    Adaptive,
}

/// Audit record of one randomization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub patient: usize,
    pub phase: Phase,
    pub pi: Option<f64>,
    pub prob_targeted: f64,
    pub arm: Arm,
    /// Index of the uniform variate consumed from the allocation stream.
    pub rng_counter: u64,
}

/// Dedicated random stream for randomizations; counts the variates it hands out.
#[derive(Debug, Clone)]
pub struct AllocationStream {
    rng: ChaCha8Rng,
    counter: u64,
}

impl AllocationStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), counter: 0 }
    }

    fn next_uniform(&mut self) -> (f64, u64) {
        let k = self.counter;
        self.counter += 1;
        (self.rng.random(), k)
    }
}

/// Randomizes one patient. Run-in: P(TT) = 1/2 and no π. Adaptive: P(TT) = allocation_prob(π).
pub fn assign_arm(
    patient: usize,
    phase: Phase,
    pi: Option<f64>,
    config: &DesignConfig,
    stream: &mut AllocationStream,
) -> Result<AllocationRecord> {
    let prob_targeted = match (phase, pi) {
        (Phase::RunIn, None) => 0.5,
        (Phase::Adaptive, Some(pi)) => allocation_prob(pi, config)?,
        (Phase::RunIn, Some(_)) => return Err(invalid("run-in assignment takes no superiority probability")),
        (Phase::Adaptive, None) => return Err(invalid("adaptive assignment needs a superiority probability")),
    };
    let (u, rng_counter) = stream.next_uniform();
    let arm = if u < prob_targeted { Arm::Targeted } else { Arm::Other };
    Ok(AllocationRecord { patient, phase, pi, prob_targeted, arm, rng_counter })
}

/// Enrollment counts after which the model is refit; each refit sets π for the next cohort.
pub fn trial_schedule(config: &DesignConfig) -> Vec<usize> {
    if config.n_adaptive == 0 {
        return Vec::new();
    }
    (0..config.n_adaptive / config.cohort)
        .map(|k| config.n_run_in + k * config.cohort)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_branches() {
        let c = DesignConfig::default();
        assert_eq!(allocation_prob(0.05, &c).unwrap(), 0.1);
        assert_eq!(allocation_prob(0.5, &c).unwrap(), 0.5);
        assert_eq!(allocation_prob(0.95, &c).unwrap(), 0.9);
        assert_eq!(allocation_prob(0.1, &c).unwrap(), 0.1);
        assert_eq!(allocation_prob(0.9, &c).unwrap(), 0.9);
        assert!(allocation_prob(1.2, &c).is_err());
        assert!(allocation_prob(f64::NAN, &c).is_err());
    }

    #[test]
    fn schedules() {
        let c = DesignConfig::default();
        assert_eq!(trial_schedule(&c), vec![100, 150, 200, 250, 300, 350]);
        let one = DesignConfig { cohort: 300, ..c };
        assert_eq!(trial_schedule(&one), vec![100]);
        let none = DesignConfig { n_adaptive: 0, ..c };
        assert!(trial_schedule(&none).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(DesignConfig::default().validate().is_ok());
        assert!(DesignConfig { cohort: 70, ..Default::default() }.validate().is_err());
        assert!(DesignConfig { p_low: 0.6, p_high: 0.4, ..Default::default() }.validate().is_err());
        assert!(DesignConfig { p_high: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn phase_and_pi_must_agree() {
        let c = DesignConfig::default();
        let mut s = AllocationStream::new(1);
        assert!(assign_arm(0, Phase::RunIn, Some(0.3), &c, &mut s).is_err());
        assert!(assign_arm(0, Phase::Adaptive, None, &c, &mut s).is_err());
        let r = assign_arm(0, Phase::Adaptive, Some(0.99), &c, &mut s).unwrap();
        assert_eq!(r.prob_targeted, 0.9);
        assert_eq!(r.rng_counter, 0);
        let r = assign_arm(1, Phase::RunIn, None, &c, &mut s).unwrap();
        assert_eq!(r.rng_counter, 1);
    }
}
