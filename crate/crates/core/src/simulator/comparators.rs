//! NAIVE (pooled two-arm) and SEPARATE (one two-arm trial per aberration) comparator designs.
//!
//! Each arm gets a conjugate normal-inverse-gamma model on log PFS. Censored times enter as
//! if observed.

use serde::{Deserialize, Serialize};

use crate::domain::{Arm, Panel, Patient};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComparatorPriors {
    pub mu0: f64,
    /// Prior variance multiplier: μ | σ² ~ N(μ0, τ² σ²).
    pub tau2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for ComparatorPriors {
    fn default() -> Self {
        Self { mu0: 0.0, tau2: 100.0, b1: 0.01, b2: 0.01 }
    }
}

impl ComparatorPriors {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau2 > 0.0 && self.b1 > 0.0 && self.b2 > 0.0 && self.mu0.is_finite()) {
            return Err(invalid(format!("invalid comparator priors {self:?}")));
        }
        Ok(())
    }
}

/// Posterior of (μ, σ²) for one arm: μ | σ² ~ N(location, σ²/precision), σ² ~ IG(shape, rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparatorPosterior {
    pub location: f64,
    pub precision: f64,
    pub shape: f64,
    pub rate: f64,
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl ComparatorPosterior {
    pub fn from_stats(n: usize, sum: f64, sum_sq: f64, priors: &ComparatorPriors) -> Self {
        let k0 = 1.0 / priors.tau2;
        let nf = n as f64;
        let precision = k0 + nf;
        let (location, ss_term) = if n == 0 {
            (priors.mu0, 0.0)
        } else {
            let mean = sum / nf;
            let ss = (sum_sq - nf * mean * mean).max(0.0);
            ((k0 * priors.mu0 + sum) / precision, 0.5 * ss + 0.5 * k0 * nf * (mean - priors.mu0).powi(2) / precision)
        };
        Self { location, precision, shape: priors.b1 + 0.5 * nf, rate: priors.b2 + ss_term, n, sum, sum_sq }
    }

    pub fn fit(log_times: &[f64], priors: &ComparatorPriors) -> Self {
        let sum = log_times.iter().sum();
        let sum_sq = log_times.iter().map(|x| x * x).sum();
        Self::from_stats(log_times.len(), sum, sum_sq, priors)
    }

    /// Posterior mean of σ² (rate / (shape − 1)), or the posterior mode when the mean is infinite.
    pub fn sigma2_estimate(&self) -> f64 {
        if self.shape > 1.0 {
            self.rate / (self.shape - 1.0)
        } else {
            self.rate / (self.shape + 1.0)
        }
    }

    /// Plug-in expected event time exp(μ̂ + σ̂²/2).
    pub fn expected_time(&self) -> f64 {
        (self.location + 0.5 * self.sigma2_estimate()).exp()
    }
}

/// Both arms of a two-arm comparator analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPosteriors {
    pub other: ComparatorPosterior,
    pub targeted: ComparatorPosterior,
}

impl ArmPosteriors {
    pub fn get(&self, arm: Arm) -> &ComparatorPosterior {
        match arm {
            Arm::Other => &self.other,
            Arm::Targeted => &self.targeted,
        }
    }

    /// argmax_z of the estimated expected time; ties go to O.
    pub fn best_arm(&self) -> Arm {
        if self.targeted.expected_time() > self.other.expected_time() {
            Arm::Targeted
        } else {
            Arm::Other
        }
    }
}

fn log_times_by_arm<'a>(patients: impl Iterator<Item = &'a Patient>) -> Result<[Vec<f64>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for p in patients {
        let arm = p.arm().ok_or_else(|| invalid(format!("patient {} has no arm", p.id)))?;
        let outcome = p.outcome().ok_or_else(|| invalid(format!("patient {} has no outcome", p.id)))?;
        out[arm.indicator()].push(outcome.time().ln());
    }
    Ok(out)
}

pub fn naive_fit(patients: &[Patient], priors: &ComparatorPriors) -> Result<ArmPosteriors> {
    let [o, tt] = log_times_by_arm(patients.iter())?;
    if o.is_empty() || tt.is_empty() {
        return Err(invalid("NAIVE needs patients in both arms"));
    }
    Ok(ArmPosteriors { other: ComparatorPosterior::fit(&o, priors), targeted: ComparatorPosterior::fit(&tt, priors) })
}

/// One NAIVE analysis per aberration stratum; `None` marks a stratum with an empty arm.
pub fn separate_fit(patients: &[Patient], panel: &Panel, priors: &ComparatorPriors) -> Result<Vec<Option<ArmPosteriors>>> {
    (0..panel.q())
        .map(|j| {
            let [o, tt] = log_times_by_arm(patients.iter().filter(|p| p.mutations.is_present(j)))?;
            Ok((!o.is_empty() && !tt.is_empty()).then(|| ArmPosteriors {
                other: ComparatorPosterior::fit(&o, priors),
                targeted: ComparatorPosterior::fit(&tt, priors),
            }))
        })
        .collect()
}
