//! Product partition model with covariates (PPMx) for lognormal survival times.

pub mod conjugate;
pub mod partition;
pub mod sampler;
pub mod similarity;
pub mod truncnorm;

pub use conjugate::{DirichletHyper, GammaHyper, NormalInvChiSq};
pub use partition::{canonical_labels, partition_log_mass, ClusterParams, Cohesion, PartitionState};
pub use sampler::{
    collapsed_log_score, covariate_start, default_cluster_prior, gibbs_reassign, impute_censored, mcmc_run, reassign_probabilities,
    update_cluster_params, AnalysisData, ClusterRecord, ClusterSummary, Draw, FullConditional, McmcSettings,
    ModelConfig, PosteriorDraws, Sampler,
};
pub use similarity::{
    categorical_bayes_identity, continuous_bayes_identity, count_bayes_identity, log_product_similarity,
    product_similarity, similarity_categorical, similarity_continuous, similarity_count, ClusterCovariates,
    CovariateValue, SimilarityHyper, SimilarityKind,
};

use serde::{Deserialize, Serialize};

use crate::domain::{Arm, MutationProfile, Panel, Status};
use crate::error::Result;

/// Covariate row used by the partition prior: one binary covariate per aberration
/// (NA when not recorded), the tumor type, and the treatment arm.
pub fn encode(mutations: &MutationProfile, tumor: usize, arm: Option<Arm>) -> Vec<CovariateValue> {
    let mut row: Vec<CovariateValue> = mutations
        .entries()
        .iter()
        .map(|s| match s {
            Status::Absent => CovariateValue::Category(0),
            Status::Present => CovariateValue::Category(1),
            Status::NotRecorded => CovariateValue::Missing,
        })
        .collect();
    row.push(CovariateValue::Category(tumor));
    row.push(arm.map_or(CovariateValue::Missing, |a| CovariateValue::Category(a.indicator())));
    row
}

/// Similarity for every covariate produced by [`encode`] under the default [`PriorSettings`].
pub fn default_similarity(panel: &Panel) -> SimilarityHyper {
    PriorSettings::default().similarity(panel).expect("default weights are valid")
}

/// Partition-prior settings for covariates produced by [`encode`]: the mass M and a symmetric
/// Dirichlet weight per covariate group. Smaller weights favor clusters that are more
/// homogeneous in that covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSettings {
    pub mass: f64,
    /// Below 1 by default, so that a tumor-specific subgroup inside a mutation cluster can
    /// split off without a large similarity cost.
    pub mutation_weight: f64,
    pub tumor_weight: f64,
    /// Small by default, so that clusters rarely mix arms.
    pub arm_weight: f64,
}

impl Default for PriorSettings {
    fn default() -> Self {
        Self { mass: 1.0, mutation_weight: 0.3, tumor_weight: 0.3, arm_weight: 1e-4 }
    }
}

impl PriorSettings {
    pub fn similarity(&self, panel: &Panel) -> Result<SimilarityHyper> {
        let dir = |w: f64, levels: usize| -> Result<SimilarityKind> {
            Ok(SimilarityKind::Categorical(DirichletHyper::new(vec![w; levels])?))
        };
        let mut kinds = Vec::with_capacity(panel.q() + 2);
        for _ in 0..panel.q() {
            kinds.push(dir(self.mutation_weight, 2)?);
        }
        kinds.push(dir(self.tumor_weight, panel.n_tumors())?);
        kinds.push(dir(self.arm_weight, 2)?);
        Ok(SimilarityHyper::new(kinds))
    }

    /// Model for `data` with the scale-adapted default cluster prior.
    pub fn model(&self, panel: &Panel, data: &AnalysisData) -> Result<ModelConfig> {
        Ok(ModelConfig {
            cohesion: Cohesion::new(self.mass)?,
            similarity: self.similarity(panel)?,
            cluster_prior: default_cluster_prior(data),
        })
    }
}
