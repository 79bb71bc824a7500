use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::similarity::{ClusterCovariates, CovariateValue, SimilarityHyper};
use crate::error::{invalid, Result};

/// Cohesion c(S) = M (|S| − 1)!.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cohesion {
    pub mass: f64,
}

impl Default for Cohesion {
    fn default() -> Self {
        Self { mass: 1.0 }
    }
}

impl Cohesion {
    pub fn new(mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid(format!("mass parameter must be positive, got {mass}")));
        }
        Ok(Self { mass })
    }

    pub fn log_cohesion(&self, size: usize) -> f64 {
        self.mass.ln() + ln_gamma(size as f64)
    }
}

/// Lognormal parameters of one cluster: log-time location and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub mu: f64,
    pub sigma2: f64,
}

/// A partition of the patients with cluster parameters and imputed event times.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionState {
    assignment: Vec<usize>,
    params: Vec<ClusterParams>,
    imputed_times: Vec<Option<f64>>,
}

impl PartitionState {
    /// Builds a state from arbitrary labels; labels are renumbered 0..J in order of first
    /// appearance and `params` must be indexed by the renumbered labels.
    pub fn new(assignment: Vec<usize>, params: Vec<ClusterParams>, imputed_times: Vec<Option<f64>>) -> Result<Self> {
        let assignment = canonical_labels(&assignment);
        let state = Self { assignment, params, imputed_times };
        state.validate()?;
        Ok(state)
    }

    /// Everyone in one cluster.
    pub fn single_cluster(n: usize, params: ClusterParams) -> Self {
        Self { assignment: vec![0; n], params: vec![params], imputed_times: vec![None; n] }
    }

    pub(crate) fn from_parts(assignment: Vec<usize>, params: Vec<ClusterParams>, imputed_times: Vec<Option<f64>>) -> Self {
        Self { assignment, params, imputed_times }
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.params.len();
        let mut sizes = vec![0usize; j];
        for &label in &self.assignment {
            if label >= j {
                return Err(invalid(format!("label {label} out of range for {j} clusters")));
            }
            sizes[label] += 1;
        }
        if !self.assignment.is_empty() && sizes.iter().any(|&s| s == 0) {
            return Err(invalid("every cluster must be nonempty"));
        }
        if self.params.iter().any(|p| !(p.sigma2 > 0.0 && p.mu.is_finite())) {
            return Err(invalid("cluster variances must be positive"));
        }
        if self.imputed_times.len() != self.assignment.len() {
            return Err(invalid("imputed times must have one slot per patient"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.params.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn params(&self) -> &[ClusterParams] {
        &self.params
    }

    pub fn imputed_times(&self) -> &[Option<f64>] {
        &self.imputed_times
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &l in &self.assignment {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == cluster).collect()
    }
}

/// Relabels clusters 0..J in order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Unnormalised log prior mass Σ_j [log g(x*_j) + log c(S_j)] of a labelling.
pub fn partition_log_mass(
    assignment: &[usize],
    covariates: &[Vec<CovariateValue>],
    cohesion: &Cohesion,
    hyper: &SimilarityHyper,
) -> Result<f64> {
    if assignment.len() != covariates.len() {
        return Err(invalid("assignment and covariates differ in length"));
    }
    let labels = canonical_labels(assignment);
    let j = labels.iter().max().map_or(0, |m| m + 1);
    let mut clusters = vec![ClusterCovariates::empty(hyper); j];
    let mut sizes = vec![0usize; j];
    for (label, row) in labels.iter().zip(covariates) {
        clusters[*label].try_add(row, hyper)?;
        sizes[*label] += 1;
    }
    Ok(clusters
        .iter()
        .zip(&sizes)
        .map(|(c, &s)| c.log_similarity(hyper) + cohesion.log_cohesion(s))
        .sum())
}
