//! Gibbs sampler for the PPMx lognormal survival regression.
//!
//! Patients are reassigned one at a time from their full conditional (existing clusters with
//! sampled parameters, plus a new cluster scored by the marginal prior predictive). Censored
//! times are imputed from truncated normals on the log scale; cluster parameters are redrawn
//! from their conjugate full conditional.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conjugate::NormalInvChiSq;
use super::conjugate::moments;
use super::partition::{canonical_labels, partition_log_mass, ClusterParams, Cohesion, PartitionState};
use super::similarity::{log_singleton_similarity, ClusterCovariates, CovariateValue, SimilarityHyper};
use super::truncnorm::sample_lower_truncated;
use crate::domain::Outcome;
use crate::error::{invalid, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Partition prior, covariate similarity and the conjugate prior on (mu_j, sigma²_j).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub cohesion: Cohesion,
    pub similarity: SimilarityHyper,
    pub cluster_prior: NormalInvChiSq,
}

/// Covariate rows and (possibly missing or censored) outcomes, one per patient.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisData {
    covariates: Vec<Vec<CovariateValue>>,
    outcomes: Vec<Option<Outcome>>,
}

impl AnalysisData {
    pub fn new(covariates: Vec<Vec<CovariateValue>>, outcomes: Vec<Option<Outcome>>) -> Result<Self> {
        if covariates.len() != outcomes.len() {
            return Err(invalid("covariates and outcomes differ in length"));
        }
        Ok(Self { covariates, outcomes })
    }

    pub fn n(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }

    pub fn covariates(&self) -> &[Vec<CovariateValue>] {
        &self.covariates
    }

    pub fn outcomes(&self) -> &[Option<Outcome>] {
        &self.outcomes
    }

    /// Log times of uncensored outcomes.
    pub fn observed_log_times(&self) -> Vec<f64> {
        self.outcomes
            .iter()
            .flatten()
            .filter(|o| !o.censored())
            .map(|o| o.time().ln())
            .collect()
    }
}

/// Chain length settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(invalid("iterations must exceed burn-in"));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be at least 1"));
        }
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Cluster contents kept with each posterior draw for predictive work.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub size: usize,
    pub params: ClusterParams,
    pub covariates: ClusterCovariates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub state: PartitionState,
    pub clusters: Vec<ClusterSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub draws: Vec<Draw>,
    pub seed: u64,
    pub settings: McmcSettings,
}

/// One row of the posterior export: a cluster within a saved draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub draw: usize,
    pub cluster: usize,
    pub size: usize,
    pub mu: f64,
    pub sigma2: f64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn cluster_records(&self) -> Vec<ClusterRecord> {
        self.draws
            .iter()
            .enumerate()
            .flat_map(|(d, draw)| {
                draw.clusters.iter().enumerate().map(move |(j, c)| ClusterRecord {
                    draw: d,
                    cluster: j + 1,
                    size: c.size,
                    mu: c.params.mu,
                    sigma2: c.params.sigma2,
                })
            })
            .collect()
    }

    pub fn mean_clusters(&self) -> f64 {
        self.draws.iter().map(|d| d.clusters.len() as f64).sum::<f64>() / self.draws.len().max(1) as f64
    }
}

/// Weakly informative, scale-adapted prior on (mu_j, sigma²_j): centred at the empirical
/// mean of the observed log times with their empirical variance as scale, k = 0.1, nu = 2.
pub fn default_cluster_prior(data: &AnalysisData) -> NormalInvChiSq {
    let logs = data.observed_log_times();
    let (n, mean, ss) = super::conjugate::moments(&logs);
    let (m, s2) = match n as usize {
        0 => (0.0, 1.0),
        1 => (mean, 1.0),
        _ => (mean, (ss / (n - 1.0)).max(1e-6)),
    };
    NormalInvChiSq { m, k: 0.1, nu: 2.0, s2 }
}

#[derive(Debug, Clone)]
struct Slot {
    size: usize,
    params: ClusterParams,
    covariates: ClusterCovariates,
}

/// Full conditional of one patient's cluster membership.
#[derive(Debug, Clone, PartialEq)]
pub struct FullConditional {
    /// Members (other than the patient) of each existing cluster.
    pub clusters: Vec<Vec<usize>>,
    /// Probabilities for each existing cluster followed by the new-cluster option.
    pub probs: Vec<f64>,
}

/// Mutable chain state over a fixed dataset.
pub struct Sampler<'a> {
    data: &'a AnalysisData,
    model: &'a ModelConfig,
    labels: Vec<usize>,
    slots: Vec<Slot>,
    log_y: Vec<Option<f64>>,
    singleton: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn from_state(state: &PartitionState, data: &'a AnalysisData, model: &'a ModelConfig) -> Result<Self> {
        state.validate()?;
        if state.n() != data.n() {
            return Err(invalid("state and data differ in number of patients"));
        }
        if model.similarity.len() != data.covariates.first().map_or(model.similarity.len(), Vec::len) {
            return Err(invalid("similarity hyperparameters do not match covariate width"));
        }
        let mut slots: Vec<Slot> = state
            .params()
            .iter()
            .map(|&params| Slot { size: 0, params, covariates: ClusterCovariates::empty(&model.similarity) })
            .collect();
        for (i, &label) in state.assignment().iter().enumerate() {
            slots[label].size += 1;
            slots[label].covariates.try_add(&data.covariates[i], &model.similarity)?;
        }
        let mut log_y = Vec::with_capacity(data.n());
        for (i, outcome) in data.outcomes.iter().enumerate() {
            log_y.push(match outcome {
                None => None,
                Some(o) if !o.censored() => Some(o.time().ln()),
                Some(o) => match state.imputed_times()[i] {
                    Some(t) if t > o.time() => Some(t.ln()),
                    _ => {
                        return Err(invalid(format!(
                            "censored patient {i} needs an imputed time above its censoring time"
                        )))
                    }
                },
            });
        }
        let singleton = data
            .covariates
            .iter()
            .map(|row| model.cohesion.mass.ln() + log_singleton_similarity(row, &model.similarity))
            .collect();
        Ok(Self {
            data,
            model,
            labels: state.assignment().to_vec(),
            slots,
            log_y,
            singleton,
            weights: Vec::new(),
        })
    }

    /// Starts from [`covariate_start`], each cluster's parameters drawn from their conditional
    /// posterior given the recorded log times, then imputes censored times.
    fn initial<R: Rng + ?Sized>(data: &'a AnalysisData, model: &'a ModelConfig, rng: &mut R) -> Result<Self> {
        let labels = covariate_start(data, model)?;
        let j = labels.iter().max().map_or(0, |m| m + 1);
        let mut slots: Vec<Slot> = (0..j)
            .map(|_| Slot {
                size: 0,
                params: ClusterParams { mu: 0.0, sigma2: 1.0 },
                covariates: ClusterCovariates::empty(&model.similarity),
            })
            .collect();
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); j];
        for (i, &l) in labels.iter().enumerate() {
            slots[l].size += 1;
            slots[l].covariates.try_add(&data.covariates[i], &model.similarity)?;
            if let Some(o) = data.outcomes[i] {
                values[l].push(o.time().ln());
            }
        }
        for (slot, v) in slots.iter_mut().zip(&values) {
            let (mu, sigma2) = model.cluster_prior.posterior_from(v).sample(rng);
            slot.params = ClusterParams { mu, sigma2 };
        }
        let log_y = data
            .outcomes
            .iter()
            .map(|o| o.map(|o| o.time().ln()))
            .collect();
        let singleton = data
            .covariates
            .iter()
            .map(|row| model.cohesion.mass.ln() + log_singleton_similarity(row, &model.similarity))
            .collect();
        let mut s = Self { data, model, labels, slots, log_y, singleton, weights: Vec::new() };
        s.impute(rng);
        Ok(s)
    }

    pub fn n_clusters(&self) -> usize {
        self.slots.len()
    }

    fn detach(&mut self, i: usize) {
        let old = self.labels[i];
        let slot = &mut self.slots[old];
        slot.size -= 1;
        slot.covariates.remove(&self.data.covariates[i]);
        if slot.size == 0 {
            let last = self.slots.len() - 1;
            self.slots.swap_remove(old);
            if old != last {
                for l in self.labels.iter_mut() {
                    if *l == last {
                        *l = old;
                    }
                }
            }
        }
    }

    fn attach(&mut self, i: usize, cluster: usize) {
        self.labels[i] = cluster;
        let slot = &mut self.slots[cluster];
        slot.size += 1;
        slot.covariates.add(&self.data.covariates[i]);
    }

    /// Log weights over existing clusters and a new one, with `i` detached.
    fn fill_log_weights(&mut self, i: usize) {
        let row = &self.data.covariates[i];
        let y = self.log_y[i];
        let sim = &self.model.similarity;
        self.weights.clear();
        for slot in &self.slots {
            let mut w = (slot.size as f64).ln() + slot.covariates.log_predictive(row, sim);
            if let Some(y) = y {
                let d = y - slot.params.mu;
                w -= 0.5 * (LN_2PI + slot.params.sigma2.ln()) + d * d / (2.0 * slot.params.sigma2);
            }
            self.weights.push(w);
        }
        let mut w_new = self.singleton[i];
        if let Some(y) = y {
            w_new += self.model.cluster_prior.log_predictive(y);
        }
        self.weights.push(w_new);
    }

    /// Reassigns patient `i` from its full conditional.
    pub fn reassign<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) {
        self.detach(i);
        self.fill_log_weights(i);
        let k = sample_log_weights(&mut self.weights, rng);
        if k == self.slots.len() {
            let prior = &self.model.cluster_prior;
            let post = match self.log_y[i] {
                Some(y) => prior.posterior(1.0, y, 0.0),
                None => *prior,
            };
            let (mu, sigma2) = post.sample(rng);
            self.slots.push(Slot {
                size: 0,
                params: ClusterParams { mu, sigma2 },
                covariates: ClusterCovariates::empty(&self.model.similarity),
            });
        }
        self.attach(i, k);
    }

    pub fn full_conditional(&self, i: usize) -> FullConditional {
        let mut scratch = Sampler {
            data: self.data,
            model: self.model,
            labels: self.labels.clone(),
            slots: self.slots.clone(),
            log_y: self.log_y.clone(),
            singleton: self.singleton.clone(),
            weights: Vec::new(),
        };
        scratch.detach(i);
        scratch.fill_log_weights(i);
        let probs = normalize_log_weights(&scratch.weights);
        let clusters = (0..scratch.slots.len())
            .map(|j| (0..self.labels.len()).filter(|&h| h != i && scratch.labels[h] == j).collect())
            .collect();
        FullConditional { clusters, probs }
    }

    /// Redraws censored log times from N(mu_j, sigma²_j) truncated below at the censoring time.
    pub fn impute<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (i, outcome) in self.data.outcomes.iter().enumerate() {
            if let Some(o) = outcome {
                if o.censored() {
                    let p = self.slots[self.labels[i]].params;
                    let lower = o.time().ln();
                    let mut z = sample_lower_truncated(rng, p.mu, p.sigma2.sqrt(), lower);
                    if z.exp() <= o.time() {
                        z = o.time().next_up().ln().next_up();
                    }
                    self.log_y[i] = Some(z);
                }
            }
        }
    }

    /// Redraws (mu_j, sigma²_j) from the conjugate full conditional of cluster `j`.
    pub fn update_params<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) {
        let mut n = 0.0;
        let mut sum = 0.0;
        for (i, &l) in self.labels.iter().enumerate() {
            if l == j {
                if let Some(y) = self.log_y[i] {
                    n += 1.0;
                    sum += y;
                }
            }
        }
        let mean = if n > 0.0 { sum / n } else { 0.0 };
        let mut ss = 0.0;
        if n > 0.0 {
            for (i, &l) in self.labels.iter().enumerate() {
                if l == j {
                    if let Some(y) = self.log_y[i] {
                        ss += (y - mean) * (y - mean);
                    }
                }
            }
        }
        let (mu, sigma2) = self.model.cluster_prior.posterior(n, mean, ss).sample(rng);
        self.slots[j].params = ClusterParams { mu, sigma2 };
    }

    fn update_all_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let j = self.slots.len();
        let mut n = vec![0.0; j];
        let mut sum = vec![0.0; j];
        for (i, &l) in self.labels.iter().enumerate() {
            if let Some(y) = self.log_y[i] {
                n[l] += 1.0;
                sum[l] += y;
            }
        }
        let mean: Vec<f64> = (0..j).map(|c| if n[c] > 0.0 { sum[c] / n[c] } else { 0.0 }).collect();
        let mut ss = vec![0.0; j];
        for (i, &l) in self.labels.iter().enumerate() {
            if let Some(y) = self.log_y[i] {
                ss[l] += (y - mean[l]) * (y - mean[l]);
            }
        }
        for c in 0..j {
            let (mu, sigma2) = self.model.cluster_prior.posterior(n[c], mean[c], ss[c]).sample(rng);
            self.slots[c].params = ClusterParams { mu, sigma2 };
        }
    }

    /// One sweep: impute, reassign every patient in index order, redraw every cluster's parameters.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.impute(rng);
        for i in 0..self.labels.len() {
            self.reassign(i, rng);
        }
        self.update_all_params(rng);
    }

    pub fn state(&self) -> PartitionState {
        let imputed = self
            .data
            .outcomes
            .iter()
            .zip(&self.log_y)
            .map(|(o, y)| match (o, y) {
                (Some(o), Some(y)) if o.censored() => Some(y.exp().max(o.time().next_up())),
                _ => None,
            })
            .collect();
        PartitionState::from_parts(
            self.labels.clone(),
            self.slots.iter().map(|s| s.params).collect(),
            imputed,
        )
    }

    pub fn snapshot(&self) -> Draw {
        Draw {
            state: self.state(),
            clusters: self
                .slots
                .iter()
                .map(|s| ClusterSummary { size: s.size, params: s.params, covariates: s.covariates.clone() })
                .collect(),
        }
    }
}

/// Samples an index with probability proportional to exp(weights); overwrites `weights`.
pub(crate) fn sample_log_weights<R: Rng + ?Sized>(weights: &mut [f64], rng: &mut R) -> usize {
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

pub(crate) fn normalize_log_weights(weights: &[f64]) -> Vec<f64> {
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|w| w / total).collect()
}

/// Reassigns patient `i` and returns the new state.
pub fn gibbs_reassign<R: Rng + ?Sized>(
    state: &PartitionState,
    i: usize,
    data: &AnalysisData,
    model: &ModelConfig,
    rng: &mut R,
) -> Result<PartitionState> {
    if i >= state.n() {
        return Err(invalid(format!("patient index {i} out of range")));
    }
    let mut s = Sampler::from_state(state, data, model)?;
    s.reassign(i, rng);
    Ok(s.state())
}

pub fn reassign_probabilities(
    state: &PartitionState,
    i: usize,
    data: &AnalysisData,
    model: &ModelConfig,
) -> Result<FullConditional> {
    if i >= state.n() {
        return Err(invalid(format!("patient index {i} out of range")));
    }
    Ok(Sampler::from_state(state, data, model)?.full_conditional(i))
}

pub fn update_cluster_params<R: Rng + ?Sized>(
    state: &PartitionState,
    cluster: usize,
    data: &AnalysisData,
    model: &ModelConfig,
    rng: &mut R,
) -> Result<PartitionState> {
    if cluster >= state.n_clusters() {
        return Err(invalid(format!("cluster {cluster} does not exist")));
    }
    let mut s = Sampler::from_state(state, data, model)?;
    s.update_params(cluster, rng);
    Ok(s.state())
}

/// Imputes every censored event time given the state's cluster parameters.
pub fn impute_censored<R: Rng + ?Sized>(
    state: &PartitionState,
    data: &AnalysisData,
    model: &ModelConfig,
    rng: &mut R,
) -> Result<PartitionState> {
    // Imputation does not depend on previous imputed values, so seed any missing ones with
    // a placeholder just above the censoring time before validation.
    let mut imputed = state.imputed_times().to_vec();
    for (slot, o) in imputed.iter_mut().zip(data.outcomes()) {
        if let Some(o) = o {
            if o.censored() && slot.is_none_or(|t| t <= o.time()) {
                *slot = Some(o.time() * 2.0);
            }
        }
    }
    let seeded = PartitionState::new(state.assignment().to_vec(), state.params().to_vec(), imputed)?;
    let mut s = Sampler::from_state(&seeded, data, model)?;
    s.impute(rng);
    Ok(s.state())
}

/// Collapsed log posterior of a partition: partition prior plus each cluster's marginal
/// likelihood of the recorded log times (censored times taken at face value).
pub fn collapsed_log_score(labels: &[usize], data: &AnalysisData, model: &ModelConfig) -> Result<f64> {
    let mut score = partition_log_mass(labels, &data.covariates, &model.cohesion, &model.similarity)?;
    let j = labels.iter().max().map_or(0, |m| m + 1);
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); j];
    for (&l, o) in labels.iter().zip(&data.outcomes) {
        if let Some(o) = o {
            values[l].push(o.time().ln());
        }
    }
    for v in &values {
        let (n, mean, ss) = moments(v);
        score += model.cluster_prior.log_marginal(n, mean, ss);
    }
    Ok(score)
}

/// Groups patients by exact agreement on the covariate columns in `columns` (a bit mask).
fn group_by_columns(data: &AnalysisData, columns: u32) -> Vec<usize> {
    let mut keys: Vec<Vec<CovariateValue>> = Vec::new();
    data.covariates
        .iter()
        .map(|row| {
            let key: Vec<CovariateValue> =
                row.iter().enumerate().filter(|(c, _)| columns & (1 << c) != 0).map(|(_, v)| *v).collect();
            match keys.iter().position(|k| *k == key) {
                Some(idx) => idx,
                None => {
                    keys.push(key);
                    keys.len() - 1
                }
            }
        })
        .collect()
}

/// Collapsed log score of one cluster: cohesion, similarity and marginal likelihood.
fn cluster_log_score(members: &[usize], data: &AnalysisData, model: &ModelConfig) -> Result<f64> {
    let mut covariates = ClusterCovariates::empty(&model.similarity);
    let mut logs = Vec::with_capacity(members.len());
    for &i in members {
        covariates.try_add(&data.covariates[i], &model.similarity)?;
        if let Some(o) = data.outcomes[i] {
            logs.push(o.time().ln());
        }
    }
    let (n, mean, ss) = moments(&logs);
    Ok(model.cohesion.log_cohesion(members.len())
        + covariates.log_similarity(&model.similarity)
        + model.cluster_prior.log_marginal(n, mean, ss))
}

/// Greedy agglomeration: repeatedly merges the two clusters whose union most increases the
/// collapsed score, until no merge helps.
fn agglomerate(labels: &[usize], data: &AnalysisData, model: &ModelConfig) -> Result<Vec<usize>> {
    let j = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); j];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    let mut scores = groups.iter().map(|g| cluster_log_score(g, data, model)).collect::<Result<Vec<_>>>()?;
    loop {
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let merged: Vec<usize> = groups[a].iter().chain(&groups[b]).copied().collect();
                let joint = cluster_log_score(&merged, data, model)?;
                let delta = joint - scores[a] - scores[b];
                if delta > 0.0 && best.is_none_or(|(d, ..)| delta > d) {
                    best = Some((delta, a, b, joint));
                }
            }
        }
        let Some((_, a, b, joint)) = best else { break };
        let moved = groups.swap_remove(b);
        scores.swap_remove(b);
        groups[a].extend(moved);
        scores[a] = joint;
    }
    let mut out = vec![0; labels.len()];
    for (l, g) in groups.iter().enumerate() {
        for &i in g {
            out[i] = l;
        }
    }
    Ok(canonical_labels(&out))
}

/// Starting partition with the best collapsed score among (a) the partitions that group
/// patients by agreement on a subset of covariates (the empty subset is the single cluster)
/// and (b) a greedy agglomeration of the finest such grouping. All subsets are tried for up to
/// 10 covariates, otherwise single covariates and all of them; (b) is skipped when the finest
/// grouping has more than 64 groups.
///
/// One-at-a-time reassignment rarely splits or merges large clusters, so the start matters.
pub fn covariate_start(data: &AnalysisData, model: &ModelConfig) -> Result<Vec<usize>> {
    let p = model.similarity.len();
    let all = if p >= 32 { u32::MAX } else { (1u32 << p) - 1 };
    let masks: Vec<u32> = if p <= 10 {
        (0..=all).collect()
    } else {
        std::iter::once(0).chain((0..p.min(31)).map(|c| 1 << c)).chain(std::iter::once(all)).collect()
    };
    let mut candidates: Vec<Vec<usize>> = masks.into_iter().map(|m| group_by_columns(data, m)).collect();
    let finest = group_by_columns(data, all);
    if finest.iter().max().map_or(0, |m| m + 1) <= 64 {
        candidates.push(agglomerate(&finest, data, model)?);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for labels in candidates {
        let score = collapsed_log_score(&labels, data, model)?;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, labels));
        }
    }
    Ok(best.map(|(_, l)| l).unwrap_or_default())
}

/// Runs the chain from [`covariate_start`] and keeps every `thin`-th sweep after burn-in.
pub fn mcmc_run(data: &AnalysisData, settings: &McmcSettings, seed: u64, model: &ModelConfig) -> Result<PosteriorDraws> {
    settings.validate()?;
    if data.is_empty() {
        return Err(invalid("cannot fit an empty dataset"));
    }
    model.cluster_prior.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = Sampler::initial(data, model, &mut rng)?;
    let mut draws = Vec::with_capacity(settings.n_draws());
    for sweep in 1..=settings.iterations {
        sampler.sweep(&mut rng);
        if sweep > settings.burn_in && (sweep - settings.burn_in) % settings.thin == 0 {
            draws.push(sampler.snapshot());
        }
    }
    Ok(PosteriorDraws { draws, seed, settings: *settings })
}
