//! Conjugate families used by the similarity functions and the cluster likelihood.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Normal–inverse-chi-square prior: `v ~ Inv-χ²(nu, s2)`, `mu | v ~ N(m, v / k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalInvChiSq {
    pub m: f64,
    pub k: f64,
    pub nu: f64,
    pub s2: f64,
}

impl NormalInvChiSq {
    pub fn new(m: f64, k: f64, nu: f64, s2: f64) -> Result<Self> {
        let h = Self { m, k, nu, s2 };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m.is_finite() || !(self.k > 0.0 && self.nu > 0.0 && self.s2 > 0.0) {
            return Err(invalid(format!("normal-inverse-chi-square needs k, nu, s2 > 0: {self:?}")));
        }
        if !(self.k.is_finite() && self.nu.is_finite() && self.s2.is_finite()) {
            return Err(invalid(format!("non-finite hyperparameter: {self:?}")));
        }
        Ok(())
    }

    /// Posterior after `n` observations with sample mean `mean` and centred sum of squares `ss`.
    pub fn posterior(&self, n: f64, mean: f64, ss: f64) -> NormalInvChiSq {
        if n <= 0.0 {
            return *self;
        }
        let k_n = self.k + n;
        let nu_n = self.nu + n;
        let m_n = (self.k * self.m + n * mean) / k_n;
        let d = mean - self.m;
        let nu_s2 = self.nu * self.s2 + ss.max(0.0) + self.k * n / k_n * d * d;
        NormalInvChiSq { m: m_n, k: k_n, nu: nu_n, s2: nu_s2 / nu_n }
    }

    pub fn posterior_from(&self, values: &[f64]) -> NormalInvChiSq {
        let (n, mean, ss) = moments(values);
        self.posterior(n, mean, ss)
    }

    /// Log marginal density of `n` observations summarised by (mean, ss).
    pub fn log_marginal(&self, n: f64, mean: f64, ss: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        let post = self.posterior(n, mean, ss);
        ln_gamma(post.nu / 2.0) - ln_gamma(self.nu / 2.0) + 0.5 * (self.k / post.k).ln()
            + 0.5 * self.nu * (self.nu * self.s2).ln()
            - 0.5 * post.nu * (post.nu * post.s2).ln()
            - 0.5 * n * PI.ln()
    }

    /// Scale of the Student-t prior predictive of one new observation.
    pub fn predictive_scale(&self) -> f64 {
        (self.s2 * (1.0 + 1.0 / self.k)).sqrt()
    }

    pub fn log_predictive(&self, x: f64) -> f64 {
        let scale = self.predictive_scale();
        let z = (x - self.m) / scale;
        let nu = self.nu;
        ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * PI).ln() - scale.ln()
            - (nu + 1.0) / 2.0 * (1.0 + z * z / nu).ln()
    }

    /// P(X > x) under the Student-t prior predictive.
    pub fn predictive_sf(&self, x: f64) -> f64 {
        let t = StudentsT::new(self.m, self.predictive_scale(), self.nu)
            .expect("validated hyperparameters");
        t.sf(x)
    }

    /// Joint log density of (mu, v).
    pub fn log_density(&self, mu: f64, v: f64) -> f64 {
        if !(v > 0.0) {
            return f64::NEG_INFINITY;
        }
        let half_nu = self.nu / 2.0;
        let log_inv_chisq = half_nu * half_nu.ln() - ln_gamma(half_nu) + half_nu * self.s2.ln()
            - (half_nu + 1.0) * v.ln()
            - self.nu * self.s2 / (2.0 * v);
        let var = v / self.k;
        let d = mu - self.m;
        log_inv_chisq - 0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
    }

    /// Draws (mu, v).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let chi = ChiSquared::new(self.nu).expect("nu > 0").sample(rng);
        let v = self.nu * self.s2 / chi;
        let z: f64 = StandardNormal.sample(rng);
        (self.m + z * (v / self.k).sqrt(), v)
    }
}

/// (n, mean, centred sum of squares).
pub fn moments(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (n, mean, ss)
}

/// Gamma(shape, rate) prior on a Poisson rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaHyper {
    pub shape: f64,
    pub rate: f64,
}

impl GammaHyper {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(invalid(format!("gamma hyperparameters must be positive: ({shape}, {rate})")));
        }
        Ok(Self { shape, rate })
    }

    pub fn log_density(&self, lambda: f64) -> f64 {
        if !(lambda > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * lambda.ln()
            - self.rate * lambda
    }

    /// Log Poisson–gamma marginal for `n` counts with total `sum` and `sum ln(x!)` = `ln_fact`.
    pub fn log_marginal(&self, n: f64, sum: f64, ln_fact: f64) -> f64 {
        let (a, b) = (self.shape, self.rate);
        a * b.ln() - ln_gamma(a) + ln_gamma(a + sum) - (a + sum) * (b + n).ln() - ln_fact
    }
}

/// Dirichlet weights for a categorical covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirichletHyper {
    weights: Vec<f64>,
}

impl DirichletHyper {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid(format!("Dirichlet weights must be positive: {weights:?}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(levels: usize) -> Self {
        Self { weights: vec![1.0; levels] }
    }

    pub fn levels(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Log Dirichlet density at a point of the simplex.
    pub fn log_density(&self, probs: &[f64]) -> f64 {
        if probs.len() != self.weights.len() {
            return f64::NEG_INFINITY;
        }
        let mut out = ln_gamma(self.total());
        for (a, p) in self.weights.iter().zip(probs) {
            if !(*p > 0.0) {
                return f64::NEG_INFINITY;
            }
            out += (a - 1.0) * p.ln() - ln_gamma(*a);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn posterior_location_single_observation() {
        let prior = NormalInvChiSq::new(0.0, 1.0, 1.0, 1.0).unwrap();
        let post = prior.posterior_from(&[2.0]);
        assert_relative_eq!(post.m, 1.0, epsilon = 1e-15);
        assert_relative_eq!(post.k, 2.0);
        assert_relative_eq!(post.nu, 2.0);
        // nu_n s2_n = 1 + 0 + 1*1/2*4 = 3
        assert_relative_eq!(post.s2, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn predictive_density_matches_marginal_of_one() {
        let prior = NormalInvChiSq::new(0.3, 0.5, 3.0, 2.0).unwrap();
        for x in [-2.0, 0.0, 0.3, 1.7] {
            assert_relative_eq!(prior.log_predictive(x), prior.log_marginal(1.0, x, 0.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn predictive_sf_is_half_at_location() {
        let prior = NormalInvChiSq::new(0.7, 0.1, 2.0, 0.3).unwrap();
        assert_relative_eq!(prior.predictive_sf(0.7), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(NormalInvChiSq::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(GammaHyper::new(1.0, -1.0).is_err());
        assert!(DirichletHyper::new(vec![1.0, 0.0]).is_err());
    }
}
