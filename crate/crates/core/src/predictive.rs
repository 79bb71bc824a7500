//! Posterior predictive summaries: membership-weighted mixtures, survival and hazard
//! functions, subgroup hazard ratios and the superiority probability used for allocation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{pair_membership, Arm, Pair, Patient};
use crate::error::{invalid, Result};
use crate::ppmx::sampler::normalize_log_weights;
use crate::ppmx::truncnorm::normal_sf;
use crate::ppmx::{encode, log_product_similarity, ClusterParams, CovariateValue, Draw, ModelConfig, NormalInvChiSq};

/// Survival values below this are clamped before taking logs.
pub const SURVIVAL_FLOOR: f64 = 1e-15;

/// Time horizon T (months) for the average hazard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon(f64);

impl Horizon {
    pub fn new(months: f64) -> Result<Self> {
        if !(months > 0.0 && months.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {months}")));
        }
        Ok(Self(months))
    }

    pub fn months(&self) -> f64 {
        self.0
    }
}

/// Third quartile of the recorded times, linear interpolation between order statistics
/// at (0-based) position 0.75 (n − 1).
pub fn compute_horizon(times: &[f64]) -> Result<Horizon> {
    if times.is_empty() {
        return Err(invalid("cannot compute a horizon from no times"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = 0.75 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Horizon::new(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    Cluster(ClusterParams),
    /// A new cluster; its log time follows the prior predictive Student t.
    New,
}

/// Predictive distribution of one patient's event time under one posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveMixture {
    pub weights: Vec<f64>,
    pub components: Vec<Component>,
    prior: NormalInvChiSq,
}

/// Membership probabilities of a new patient with covariates `query` over the draw's J
/// clusters and a new (J+1)-th cluster.
pub fn membership_weights(draw: &Draw, query: &[CovariateValue], model: &ModelConfig) -> Vec<f64> {
    let sim = &model.similarity;
    let mut logw: Vec<f64> = draw
        .clusters
        .iter()
        .map(|c| (c.size as f64).ln() + c.covariates.log_predictive(query, sim))
        .collect();
    let single = log_product_similarity(&[query], sim).unwrap_or(0.0);
    logw.push(model.cohesion.mass.ln() + single);
    normalize_log_weights(&logw)
}

impl PredictiveMixture {
    pub fn new(draw: &Draw, query: &[CovariateValue], model: &ModelConfig) -> Self {
        let weights = membership_weights(draw, query, model);
        let mut components: Vec<Component> = draw.clusters.iter().map(|c| Component::Cluster(c.params)).collect();
        components.push(Component::New);
        Self { weights, components, prior: model.cluster_prior }
    }

    /// Single-component mixture, mostly for tests and closed-form checks.
    pub fn single(params: ClusterParams, prior: NormalInvChiSq) -> Self {
        Self { weights: vec![1.0], components: vec![Component::Cluster(params)], prior }
    }

    pub fn from_parts(weights: Vec<f64>, components: Vec<Component>, prior: NormalInvChiSq) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(invalid("weights and components must be nonempty and aligned"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("mixture weights must be a probability vector"));
        }
        Ok(Self { weights, components, prior })
    }

    /// S(t) = P(y ≥ t).
    pub fn survival(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("survival time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        let lt = t.ln();
        let s: f64 = self
            .weights
            .iter()
            .zip(&self.components)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| {
                w * match c {
                    Component::Cluster(p) => normal_sf((lt - p.mu) / p.sigma2.sqrt()),
                    Component::New => self.prior.predictive_sf(lt),
                }
            })
            .sum();
        Ok(s.clamp(0.0, 1.0))
    }

    /// H(t) = −log S(t), with S clamped below at [`SURVIVAL_FLOOR`].
    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        let s = self.survival(t)?;
        Ok(-(s.max(SURVIVAL_FLOOR)).ln())
    }

    /// AH = H(T) / T.
    pub fn average_hazard(&self, horizon: Horizon) -> f64 {
        self.cumulative_hazard(horizon.months()).expect("horizon is positive") / horizon.months()
    }

    /// One log event time.
    pub fn sample_log<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = k;
                break;
            }
        }
        let (mu, sigma2) = match self.components[pick] {
            Component::Cluster(p) => (p.mu, p.sigma2),
            Component::New => self.prior.sample(rng),
        };
        let z: f64 = StandardNormal.sample(rng);
        mu + sigma2.sqrt() * z
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_log(rng).exp()
    }

    /// Mean event time with each component at its lognormal mean; the new-cluster
    /// component is evaluated at the prior location and scale.
    pub fn plugin_mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| {
                let (mu, s2) = match c {
                    Component::Cluster(p) => (p.mu, p.sigma2),
                    Component::New => (self.prior.m, self.prior.s2),
                };
                w * (mu + s2 / 2.0).exp()
            })
            .sum()
    }

    /// Mean and variance of the log event time, with the new-cluster component at the
    /// prior location and scale.
    pub fn log_moments(&self) -> (f64, f64) {
        let (mut m1, mut m2) = (0.0, 0.0);
        for (w, c) in self.weights.iter().zip(&self.components) {
            let (mu, s2) = match c {
                Component::Cluster(p) => (p.mu, p.sigma2),
                Component::New => (self.prior.m, self.prior.s2),
            };
            m1 += w * mu;
            m2 += w * (s2 + mu * mu);
        }
        (m1, (m2 - m1 * m1).max(0.0))
    }
}

pub fn survival(draw: &Draw, t: f64, query: &[CovariateValue], model: &ModelConfig) -> Result<f64> {
    PredictiveMixture::new(draw, query, model).survival(t)
}

pub fn cumulative_hazard(draw: &Draw, t: f64, query: &[CovariateValue], model: &ModelConfig) -> Result<f64> {
    PredictiveMixture::new(draw, query, model).cumulative_hazard(t)
}

pub fn average_hazard(draw: &Draw, query: &[CovariateValue], model: &ModelConfig, horizon: Horizon) -> f64 {
    PredictiveMixture::new(draw, query, model).average_hazard(horizon)
}

/// Mean AH over the subgroup's members with the arm set to `arm`.
pub fn subgroup_average_hazard(
    draw: &Draw,
    pair: Pair,
    arm: Arm,
    patients: &[Patient],
    model: &ModelConfig,
    horizon: Horizon,
) -> Result<f64> {
    let members: Vec<&Patient> = patients.iter().filter(|p| pair_membership(p, pair)).collect();
    if members.is_empty() {
        return Err(invalid(format!("subgroup {pair} has no members")));
    }
    let total: f64 = members
        .iter()
        .map(|p| average_hazard(draw, &encode(&p.mutations, p.tumor, Some(arm)), model, horizon))
        .sum();
    Ok(total / members.len() as f64)
}

/// AH ratio O over TT; 0/0 is read as no difference.
pub fn ratio_of_hazards(ah_other: f64, ah_targeted: f64) -> f64 {
    if ah_other == 0.0 && ah_targeted == 0.0 {
        1.0
    } else {
        ah_other.max(f64::MIN_POSITIVE) / ah_targeted.max(f64::MIN_POSITIVE)
    }
}

pub fn hazard_ratio(draw: &Draw, pair: Pair, patients: &[Patient], model: &ModelConfig, horizon: Horizon) -> Result<f64> {
    let o = subgroup_average_hazard(draw, pair, Arm::Other, patients, model, horizon)?;
    let tt = subgroup_average_hazard(draw, pair, Arm::Targeted, patients, model, horizon)?;
    Ok(ratio_of_hazards(o, tt))
}

/// Event times from the posterior predictive: a draw chosen uniformly, then a component by
/// membership, then a lognormal variate.
pub fn predictive_sample<R: Rng + ?Sized>(
    draws: &[Draw],
    query: &[CovariateValue],
    model: &ModelConfig,
    rng: &mut R,
    n_samples: usize,
) -> Result<Vec<f64>> {
    if draws.is_empty() || n_samples == 0 {
        return Err(invalid("need at least one draw and one sample"));
    }
    let mixtures: Vec<PredictiveMixture> = draws.iter().map(|d| PredictiveMixture::new(d, query, model)).collect();
    Ok((0..n_samples)
        .map(|_| mixtures[rng.random_range(0..mixtures.len())].sample(rng))
        .collect())
}

/// Monte Carlo estimate of P(y¹ > y⁰) from paired per-draw mixtures under TT and O.
pub fn superiority_from_mixtures<R: Rng + ?Sized>(
    targeted: &[PredictiveMixture],
    other: &[PredictiveMixture],
    rng: &mut R,
    n_mc: usize,
) -> Result<f64> {
    if targeted.is_empty() || targeted.len() != other.len() || n_mc == 0 {
        return Err(invalid("need paired mixtures and n_mc ≥ 1"));
    }
    let mut wins = 0usize;
    for _ in 0..n_mc {
        let d = rng.random_range(0..targeted.len());
        let y1 = targeted[d].sample_log(rng);
        let y0 = other[d].sample_log(rng);
        if y1 > y0 {
            wins += 1;
        }
    }
    Ok(wins as f64 / n_mc as f64)
}

/// π for a patient with the given mutations and tumor: both potential outcomes are drawn
/// from the same posterior draw, independently given it.
pub fn superiority_prob<R: Rng + ?Sized>(
    draws: &[Draw],
    mutations: &crate::domain::MutationProfile,
    tumor: usize,
    model: &ModelConfig,
    rng: &mut R,
    n_mc: usize,
) -> Result<f64> {
    let q1 = encode(mutations, tumor, Some(Arm::Targeted));
    let q0 = encode(mutations, tumor, Some(Arm::Other));
    let tt: Vec<_> = draws.iter().map(|d| PredictiveMixture::new(d, &q1, model)).collect();
    let o: Vec<_> = draws.iter().map(|d| PredictiveMixture::new(d, &q0, model)).collect();
    superiority_from_mixtures(&tt, &o, rng, n_mc)
}

/// Lognormal plug-in mean event time, exp(m + v/2), where m and v are the posterior means of
/// the per-draw log-time predictive mean and variance. Averaging on the log scale keeps a
/// rare draw with a huge small-cluster variance from dominating.
pub fn predictive_mean(draws: &[Draw], query: &[CovariateValue], model: &ModelConfig) -> f64 {
    let n = draws.len().max(1) as f64;
    let (m, v) = draws
        .iter()
        .map(|d| PredictiveMixture::new(d, query, model).log_moments())
        .fold((0.0, 0.0), |(a, b), (m, v)| (a + m / n, b + v / n));
    (m + v / 2.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn prior() -> NormalInvChiSq {
        NormalInvChiSq::new(0.0, 0.1, 2.0, 1.0).unwrap()
    }

    #[test]
    fn horizon_quantile() {
        assert_relative_eq!(compute_horizon(&[1.0, 2.0, 3.0, 4.0]).unwrap().months(), 3.25);
        assert_relative_eq!(compute_horizon(&[4.0, 1.0, 3.0, 2.0]).unwrap().months(), 3.25);
        assert_relative_eq!(compute_horizon(&[2.5; 7]).unwrap().months(), 2.5);
        assert!(compute_horizon(&[]).is_err());
    }

    #[test]
    fn standard_lognormal_hazards() {
        let m = PredictiveMixture::single(ClusterParams { mu: 0.0, sigma2: 1.0 }, prior());
        assert_eq!(m.survival(0.0).unwrap(), 1.0);
        assert_eq!(m.cumulative_hazard(0.0).unwrap(), 0.0);
        assert_relative_eq!(m.survival(1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.cumulative_hazard(1.0).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(m.average_hazard(Horizon::new(1.0).unwrap()), 2f64.ln(), epsilon = 1e-12);
        assert!(m.survival(-1.0).is_err());
    }

    #[test]
    fn survival_floor_bounds_hazard() {
        let m = PredictiveMixture::single(ClusterParams { mu: 0.0, sigma2: 1e-4 }, prior());
        let h = m.cumulative_hazard(10.0).unwrap();
        assert_relative_eq!(h, -(SURVIVAL_FLOOR.ln()), epsilon = 1e-9);
    }

    #[test]
    fn hazard_ratio_degenerate() {
        assert_eq!(ratio_of_hazards(0.0, 0.0), 1.0);
        assert!(ratio_of_hazards(0.2, 0.1) > 1.0);
    }

    #[test]
    fn mixture_validation() {
        let c = Component::Cluster(ClusterParams { mu: 0.0, sigma2: 1.0 });
        assert!(PredictiveMixture::from_parts(vec![0.5, 0.5], vec![c, Component::New], prior()).is_ok());
        assert!(PredictiveMixture::from_parts(vec![0.5, 0.4], vec![c, Component::New], prior()).is_err());
        assert!(PredictiveMixture::from_parts(vec![1.0], vec![c, Component::New], prior()).is_err());
    }
}
