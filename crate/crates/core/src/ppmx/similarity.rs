//! Covariate similarity functions.
//!
//! Each similarity is the marginal of a cluster's covariate values under a conjugate
//! auxiliary model, so clusters with homogeneous covariates score higher. All work is done
//! in log space; the `similarity_*` wrappers exponentiate for convenience.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::conjugate::{moments, DirichletHyper, GammaHyper, NormalInvChiSq};
use crate::error::{invalid, Result};

/// One covariate value; `Missing` entries are skipped by the similarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateValue {
    Category(usize),
    Real(f64),
    Count(u64),
    Missing,
}

/// Auxiliary model for one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Categorical(DirichletHyper),
    Continuous(NormalInvChiSq),
    Count(GammaHyper),
    /// Similarity identically 1; the covariate does not influence the partition.
    Constant,
}

/// Per-covariate auxiliary models; the product similarity multiplies over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityHyper {
    pub kinds: Vec<SimilarityKind>,
}

impl SimilarityHyper {
    pub fn new(kinds: Vec<SimilarityKind>) -> Self {
        Self { kinds }
    }

    /// Every factor forced to 1: the partition prior reduces to the Polya urn.
    pub fn disabled(p: usize) -> Self {
        Self { kinds: vec![SimilarityKind::Constant; p] }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

pub fn log_similarity_categorical(values: &[usize], hyper: &DirichletHyper) -> Result<f64> {
    let mut counts = vec![0u64; hyper.levels()];
    for &v in values {
        *counts
            .get_mut(v)
            .ok_or_else(|| invalid(format!("category {v} outside 0..{}", hyper.levels())))? += 1;
    }
    Ok(categorical_from_counts(&counts, hyper))
}

fn categorical_from_counts(counts: &[u64], hyper: &DirichletHyper) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let total = hyper.total();
    let mut out = ln_gamma(total) - ln_gamma(total + n as f64);
    for (&c, &a) in counts.iter().zip(hyper.weights()) {
        if c > 0 {
            out += ln_gamma(a + c as f64) - ln_gamma(a);
        }
    }
    out
}

/// Dirichlet–multinomial marginal of a sequence of category labels (0-based).
pub fn similarity_categorical(values: &[usize], hyper: &DirichletHyper) -> Result<f64> {
    log_similarity_categorical(values, hyper).map(f64::exp)
}

pub fn log_similarity_continuous(values: &[f64], hyper: &NormalInvChiSq) -> f64 {
    let (n, mean, ss) = moments(values);
    hyper.log_marginal(n, mean, ss)
}

/// Marginal density of the values under the normal model with a normal–inverse-chi-square
/// prior (a scaled, correlated multivariate t).
pub fn similarity_continuous(values: &[f64], hyper: &NormalInvChiSq) -> f64 {
    log_similarity_continuous(values, hyper).exp()
}

pub fn log_similarity_count(values: &[i64], hyper: &GammaHyper) -> Result<f64> {
    let mut sum = 0.0;
    let mut ln_fact = 0.0;
    for &v in values {
        if v < 0 {
            return Err(invalid(format!("count covariate must be nonnegative, got {v}")));
        }
        sum += v as f64;
        ln_fact += ln_gamma(v as f64 + 1.0);
    }
    Ok(hyper.log_marginal(values.len() as f64, sum, ln_fact))
}

/// Poisson–gamma marginal of the counts.
pub fn similarity_count(values: &[i64], hyper: &GammaHyper) -> Result<f64> {
    log_similarity_count(values, hyper).map(f64::exp)
}

/// Log of the product similarity of a cluster, using only recorded entries per covariate.
pub fn log_product_similarity(rows: &[&[CovariateValue]], hyper: &SimilarityHyper) -> Result<f64> {
    let mut stats = ClusterCovariates::empty(hyper);
    for row in rows {
        stats.try_add(row, hyper)?;
    }
    Ok(stats.log_similarity(hyper))
}

pub fn product_similarity(rows: &[&[CovariateValue]], hyper: &SimilarityHyper) -> Result<f64> {
    log_product_similarity(rows, hyper).map(f64::exp)
}

/// Evaluates a categorical similarity through Bayes' theorem at the probe `probs`:
/// `prod q(x_i | probe) q(probe) / q(probe | x)`. Agrees with the direct marginal for any probe.
pub fn categorical_bayes_identity(values: &[usize], hyper: &DirichletHyper, probs: &[f64]) -> Result<f64> {
    let prior = hyper.log_density(probs);
    if !prior.is_finite() {
        return Err(invalid("probe has zero prior density"));
    }
    let mut counts = vec![0.0; hyper.levels()];
    let mut loglik = 0.0;
    for &v in values {
        if v >= hyper.levels() {
            return Err(invalid(format!("category {v} outside 0..{}", hyper.levels())));
        }
        counts[v] += 1.0;
        loglik += probs[v].ln();
    }
    let post = DirichletHyper::new(hyper.weights().iter().zip(&counts).map(|(a, c)| a + c).collect())?;
    Ok((loglik + prior - post.log_density(probs)).exp())
}

/// Bayes-theorem evaluation of the continuous similarity at the probe (mu, v).
pub fn continuous_bayes_identity(values: &[f64], hyper: &NormalInvChiSq, mu: f64, v: f64) -> Result<f64> {
    let prior = hyper.log_density(mu, v);
    if !prior.is_finite() {
        return Err(invalid("probe has zero prior density"));
    }
    let loglik: f64 = values
        .iter()
        .map(|x| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - mu) * (x - mu) / (2.0 * v))
        .sum();
    let post = hyper.posterior_from(values);
    Ok((loglik + prior - post.log_density(mu, v)).exp())
}

/// Bayes-theorem evaluation of the Poisson–gamma similarity at the probe rate.
pub fn count_bayes_identity(values: &[i64], hyper: &GammaHyper, rate: f64) -> Result<f64> {
    let prior = hyper.log_density(rate);
    if !prior.is_finite() {
        return Err(invalid("probe has zero prior density"));
    }
    let mut loglik = 0.0;
    let mut sum = 0.0;
    for &x in values {
        if x < 0 {
            return Err(invalid(format!("count covariate must be nonnegative, got {x}")));
        }
        let x = x as f64;
        loglik += x * rate.ln() - rate - ln_gamma(x + 1.0);
        sum += x;
    }
    let post = GammaHyper::new(hyper.shape + sum, hyper.rate + values.len() as f64)?;
    Ok((loglik + prior - post.log_density(rate)).exp())
}

/// Sufficient statistics of one covariate within a cluster.
#[derive(Debug, Clone, PartialEq)]
pub enum CovStats {
    Categorical { counts: Vec<u32>, n: u32 },
    Continuous { n: u32, sum: f64, sumsq: f64 },
    Count { n: u32, sum: u64, ln_fact: f64 },
    Constant,
}

impl CovStats {
    fn empty(kind: &SimilarityKind) -> Self {
        match kind {
            SimilarityKind::Categorical(d) => CovStats::Categorical { counts: vec![0; d.levels()], n: 0 },
            SimilarityKind::Continuous(_) => CovStats::Continuous { n: 0, sum: 0.0, sumsq: 0.0 },
            SimilarityKind::Count(_) => CovStats::Count { n: 0, sum: 0, ln_fact: 0.0 },
            SimilarityKind::Constant => CovStats::Constant,
        }
    }

    fn check(&self, value: CovariateValue) -> Result<()> {
        match (self, value) {
            (_, CovariateValue::Missing) | (CovStats::Constant, _) => Ok(()),
            (CovStats::Categorical { counts, .. }, CovariateValue::Category(c)) if c < counts.len() => Ok(()),
            (CovStats::Continuous { .. }, CovariateValue::Real(x)) if x.is_finite() => Ok(()),
            (CovStats::Count { .. }, CovariateValue::Count(_)) => Ok(()),
            (s, v) => Err(invalid(format!("covariate value {v:?} does not fit {s:?}"))),
        }
    }

    fn apply(&mut self, value: CovariateValue, sign: i32) {
        match (self, value) {
            (_, CovariateValue::Missing) | (CovStats::Constant, _) => {}
            (CovStats::Categorical { counts, n }, CovariateValue::Category(c)) => {
                counts[c] = counts[c].wrapping_add_signed(sign);
                *n = n.wrapping_add_signed(sign);
            }
            (CovStats::Continuous { n, sum, sumsq }, CovariateValue::Real(x)) => {
                let s = sign as f64;
                *n = n.wrapping_add_signed(sign);
                *sum += s * x;
                *sumsq += s * x * x;
            }
            (CovStats::Count { n, sum, ln_fact }, CovariateValue::Count(x)) => {
                *n = n.wrapping_add_signed(sign);
                *sum = sum.wrapping_add_signed(sign as i64 * x as i64);
                *ln_fact += sign as f64 * ln_gamma(x as f64 + 1.0);
            }
            (s, v) => panic!("covariate value {v:?} does not fit {s:?}"),
        }
    }

    fn log_similarity(&self, kind: &SimilarityKind) -> f64 {
        match (self, kind) {
            (CovStats::Categorical { counts, .. }, SimilarityKind::Categorical(d)) => {
                let counts: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
                categorical_from_counts(&counts, d)
            }
            (CovStats::Continuous { n, sum, sumsq }, SimilarityKind::Continuous(h)) => {
                let n = *n as f64;
                if n == 0.0 {
                    return 0.0;
                }
                let mean = sum / n;
                h.log_marginal(n, mean, (sumsq - n * mean * mean).max(0.0))
            }
            (CovStats::Count { n, sum, ln_fact }, SimilarityKind::Count(h)) => {
                h.log_marginal(*n as f64, *sum as f64, *ln_fact)
            }
            _ => 0.0,
        }
    }

    /// log g(x* ∪ {value}) − log g(x*).
    fn log_predictive(&self, kind: &SimilarityKind, value: CovariateValue) -> f64 {
        match (self, kind, value) {
            (_, _, CovariateValue::Missing) => 0.0,
            (CovStats::Categorical { counts, n }, SimilarityKind::Categorical(d), CovariateValue::Category(c)) => {
                ((counts[c] as f64 + d.weights()[c]) / (*n as f64 + d.total())).ln()
            }
            (CovStats::Constant, _, _) | (_, SimilarityKind::Constant, _) => 0.0,
            _ => {
                let mut with = self.clone();
                with.apply(value, 1);
                with.log_similarity(kind) - self.log_similarity(kind)
            }
        }
    }
}

/// Covariate sufficient statistics of one cluster, one entry per covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCovariates {
    stats: Vec<CovStats>,
}

impl ClusterCovariates {
    pub fn empty(hyper: &SimilarityHyper) -> Self {
        Self { stats: hyper.kinds.iter().map(CovStats::empty).collect() }
    }

    pub fn try_add(&mut self, row: &[CovariateValue], hyper: &SimilarityHyper) -> Result<()> {
        if row.len() != hyper.len() {
            return Err(invalid(format!(
                "covariate row has {} entries, similarity expects {}",
                row.len(),
                hyper.len()
            )));
        }
        for (s, v) in self.stats.iter().zip(row) {
            s.check(*v)?;
        }
        self.add(row);
        Ok(())
    }

    pub fn add(&mut self, row: &[CovariateValue]) {
        for (s, v) in self.stats.iter_mut().zip(row) {
            s.apply(*v, 1);
        }
    }

    pub fn remove(&mut self, row: &[CovariateValue]) {
        for (s, v) in self.stats.iter_mut().zip(row) {
            s.apply(*v, -1);
        }
    }

    /// log g(x*_j) = Σ_ℓ log g_ℓ(x*_jℓ).
    pub fn log_similarity(&self, hyper: &SimilarityHyper) -> f64 {
        self.stats.iter().zip(&hyper.kinds).map(|(s, k)| s.log_similarity(k)).sum()
    }

    /// log g(x*_j ∪ {row}) − log g(x*_j).
    pub fn log_predictive(&self, row: &[CovariateValue], hyper: &SimilarityHyper) -> f64 {
        self.stats
            .iter()
            .zip(&hyper.kinds)
            .zip(row)
            .map(|((s, k), v)| s.log_predictive(k, *v))
            .sum()
    }

    pub fn stats(&self) -> &[CovStats] {
        &self.stats
    }
}

/// log g({row}) for a singleton cluster.
pub fn log_singleton_similarity(row: &[CovariateValue], hyper: &SimilarityHyper) -> f64 {
    ClusterCovariates::empty(hyper).log_predictive(row, hyper)
}
