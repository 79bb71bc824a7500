//! Patients, covariates, mutation–tumor subgroups and subpopulation reports.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Recorded status of one molecular aberration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Absent,
    Present,
    NotRecorded,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Absent => "0",
            Status::Present => "1",
            Status::NotRecorded => "NA",
        }
    }

    pub fn parse(s: &str) -> Option<Status> {
        match s.trim() {
            "0" => Some(Status::Absent),
            "1" => Some(Status::Present),
            "NA" | "na" | "" => Some(Status::NotRecorded),
            _ => None,
        }
    }
}

/// Tri-state indicators, one per aberration on the panel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MutationProfile {
    entries: Vec<Status>,
}

impl MutationProfile {
    pub fn new(entries: Vec<Status>) -> Self {
        Self { entries }
    }

    /// Profile with exactly aberration `present` recorded as 1 and every other entry 0.
    pub fn single(q: usize, present: usize) -> Self {
        let entries = (0..q)
            .map(|j| if j == present { Status::Present } else { Status::Absent })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, j: usize) -> Status {
        self.entries.get(j).copied().unwrap_or(Status::NotRecorded)
    }

    pub fn is_present(&self, j: usize) -> bool {
        self.get(j) == Status::Present
    }

    pub fn entries(&self) -> &[Status] {
        &self.entries
    }

    /// Indices of the non-NA entries.
    pub fn recorded_set(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != Status::NotRecorded)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Treatment arm: targeted therapy (TT) or therapy not selected by profiling (O).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "O")]
    Other,
    #[serde(rename = "TT")]
    Targeted,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Other, Arm::Targeted];

    /// 0 for O, 1 for TT.
    pub fn indicator(self) -> usize {
        match self {
            Arm::Other => 0,
            Arm::Targeted => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Arm::Other => "O",
            Arm::Targeted => "TT",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        match s.trim() {
            "O" => Some(Arm::Other),
            "TT" => Some(Arm::Targeted),
            _ => None,
        }
    }
}

/// Event time in months and censoring flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    time: f64,
    censored: bool,
}

impl Outcome {
    pub fn new(time: f64, censored: bool) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(invalid(format!("outcome time must be positive and finite, got {time}")));
        }
        Ok(Self { time, censored })
    }

    pub fn event(time: f64) -> Result<Self> {
        Self::new(time, false)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn censored(&self) -> bool {
        self.censored
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patient {
    pub id: usize,
    pub mutations: MutationProfile,
    pub tumor: usize,
    arm: Option<Arm>,
    outcome: Option<Outcome>,
}

impl Patient {
    pub fn new(id: usize, mutations: MutationProfile, tumor: usize) -> Self {
        Self { id, mutations, tumor, arm: None, outcome: None }
    }

    pub fn arm(&self) -> Option<Arm> {
        self.arm
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    /// Assigns the arm. An arm, once assigned, cannot be changed.
    pub fn assign(&mut self, arm: Arm) -> Result<()> {
        match self.arm {
            Some(existing) if existing != arm => Err(invalid(format!(
                "patient {} already assigned to {}",
                self.id,
                existing.label()
            ))),
            _ => {
                self.arm = Some(arm);
                Ok(())
            }
        }
    }

    pub fn with_arm(mut self, arm: Arm) -> Result<Self> {
        self.assign(arm)?;
        Ok(self)
    }

    pub fn set_outcome(&mut self, outcome: Option<Outcome>) {
        self.outcome = outcome;
    }

    pub fn with_outcome(mut self, outcome: Outcome) -> Self {
        self.outcome = Some(outcome);
        self
    }
}

/// Subgroup of patients carrying aberration `mutation` with tumor type `tumor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub mutation: usize,
    pub tumor: usize,
}

impl Pair {
    pub fn new(mutation: usize, tumor: usize) -> Self {
        Self { mutation, tumor }
    }
}

/// Nonempty, duplicate-free set of pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairSet(BTreeSet<Pair>);

impl PairSet {
    pub fn new(pairs: impl IntoIterator<Item = Pair>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for p in pairs {
            if !set.insert(p) {
                return Err(invalid(format!("duplicate pair {p:?} in report")));
            }
        }
        if set.is_empty() {
            return Err(invalid("a pair-set report needs at least one pair"));
        }
        Ok(Self(set))
    }

    pub fn contains(&self, pair: &Pair) -> bool {
        self.0.contains(pair)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pair> {
        self.0.iter()
    }
}

/// Final recommendation of the trial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Report {
    /// No subpopulation and no overall effect (A0).
    Null,
    /// Overall effect, no subpopulation (A1).
    Overall,
    Pairs(PairSet),
}

impl Report {
    pub fn pairs(pairs: impl IntoIterator<Item = Pair>) -> Result<Self> {
        Ok(Report::Pairs(PairSet::new(pairs)?))
    }

    pub fn contains(&self, pair: &Pair) -> bool {
        match self {
            Report::Pairs(set) => set.contains(pair),
            _ => false,
        }
    }

    pub fn pair_list(&self) -> Vec<Pair> {
        match self {
            Report::Pairs(set) => set.iter().copied().collect(),
            _ => Vec::new(),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Report::Null)
    }

    pub fn is_overall(&self) -> bool {
        matches!(self, Report::Overall)
    }
}

/// Names of the aberrations and tumor types under study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub aberrations: Vec<String>,
    pub tumors: Vec<String>,
}

impl Default for Panel {
    fn default() -> Self {
        Self::impact2()
    }
}

impl Panel {
    pub fn impact2() -> Self {
        Self {
            aberrations: ["FGFR", "BRAF", "PIK3CA", "PTEN", "MET"].map(String::from).to_vec(),
            tumors: ["BRCA", "Ovary", "Lung"].map(String::from).to_vec(),
        }
    }

    pub fn q(&self) -> usize {
        self.aberrations.len()
    }

    pub fn n_tumors(&self) -> usize {
        self.tumors.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.aberrations.is_empty() || self.tumors.is_empty() {
            return Err(invalid("panel needs at least one aberration and one tumor type"));
        }
        let mut names = BTreeSet::new();
        for n in self.aberrations.iter().chain(&self.tumors) {
            if n.is_empty() || n.contains([',', ':', ';']) {
                return Err(invalid(format!("bad panel name {n:?}")));
            }
            if !names.insert(n) {
                return Err(invalid(format!("panel name {n:?} is not unique")));
            }
        }
        Ok(())
    }

    /// All pairs in (mutation, tumor) lexicographic order.
    pub fn all_pairs(&self) -> Vec<Pair> {
        (0..self.q())
            .flat_map(|j| (0..self.n_tumors()).map(move |c| Pair::new(j, c)))
            .collect()
    }

    pub fn aberration_index(&self, name: &str) -> Option<usize> {
        self.aberrations.iter().position(|a| a == name)
    }

    pub fn tumor_index(&self, name: &str) -> Option<usize> {
        self.tumors.iter().position(|t| t == name)
    }

    pub fn pair(&self, mutation: &str, tumor: &str) -> Result<Pair> {
        let j = self
            .aberration_index(mutation)
            .ok_or_else(|| invalid(format!("unknown aberration {mutation:?}")))?;
        let c = self
            .tumor_index(tumor)
            .ok_or_else(|| invalid(format!("unknown tumor type {tumor:?}")))?;
        Ok(Pair::new(j, c))
    }

    pub fn pair_label(&self, pair: Pair) -> String {
        format!("{}:{}", self.aberrations[pair.mutation], self.tumors[pair.tumor])
    }

    pub fn report_label(&self, report: &Report) -> String {
        match report {
            Report::Null => "A0".to_string(),
            Report::Overall => "A1".to_string(),
            Report::Pairs(set) => {
                set.iter().map(|p| self.pair_label(*p)).collect::<Vec<_>>().join(";")
            }
        }
    }

    pub fn parse_report(&self, s: &str) -> Result<Report> {
        match s.trim() {
            "A0" => Ok(Report::Null),
            "A1" => Ok(Report::Overall),
            other => {
                let pairs = other
                    .split(';')
                    .map(|tok| {
                        let (m, t) = tok
                            .split_once(':')
                            .ok_or_else(|| invalid(format!("bad pair token {tok:?}")))?;
                        self.pair(m, t)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Report::pairs(pairs)
            }
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.mutation, self.tumor)
    }
}

/// True iff the patient has the pair's tumor type and the aberration recorded as present.
/// A not-recorded aberration does not make the patient a member.
pub fn pair_membership(patient: &Patient, pair: Pair) -> bool {
    patient.tumor == pair.tumor && patient.mutations.is_present(pair.mutation)
}

/// n(a): number of patients in the subgroup.
pub fn subgroup_size(patients: &[Patient], pair: Pair) -> usize {
    patients.iter().filter(|p| pair_membership(p, pair)).count()
}

/// Pairs with at least `min_size` members.
pub fn eligible_pairs(patients: &[Patient], panel: &Panel, min_size: usize) -> BTreeSet<Pair> {
    panel
        .all_pairs()
        .into_iter()
        .filter(|&pair| subgroup_size(patients, pair) >= min_size)
        .collect()
}
