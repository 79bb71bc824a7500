//! Output tables. Base tables hold per-replicate records; derived tables (summary, Pr(a),
//! allocation, TE summary) are recomputed from the base tables, so reading a run back and
//! deriving again reproduces the written files exactly.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use basket_core::decision::{DecisionSummary, PairSummary};
use basket_core::domain::{Arm, Panel, Pair, Report};
use basket_core::simulator::{te_errors, Method, OperatingChars, SimulationRun};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const REPLICATES: &str = "replicates.csv";
pub const REPLICATE_PAIRS: &str = "replicate_pairs.csv";
pub const TRUTH: &str = "truth.csv";
pub const SUMMARY: &str = "summary.csv";
pub const PR_A: &str = "pr_a.csv";
pub const PR_A_MATRIX: &str = "pr_a_matrix.csv";
pub const ALLOCATION: &str = "allocation.csv";
pub const TE_REPLICATES: &str = "te_replicates.csv";
pub const TE_SUMMARY: &str = "te_summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub report: String,
    pub p_h0: f64,
    pub p_h1: f64,
    pub horizon: f64,
    pub n_censored: usize,
    pub mean_clusters: f64,
}

/// One pair within one replicate. Decision fields are empty for pairs without patients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicatePairRow {
    pub replicate: usize,
    pub pair: String,
    pub n: usize,
    pub n_targeted: usize,
    pub eligible: bool,
    pub contribution: Option<f64>,
    pub mean_log_hr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub pair: String,
    pub population: usize,
    pub eligible: bool,
    pub in_true_report: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub n_reps: usize,
    pub true_report: String,
    pub tie: Option<f64>,
    pub tsr: Option<f64>,
    pub tpr: Option<f64>,
    pub fsr: Option<f64>,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrARow {
    pub pair: String,
    pub mutation: String,
    pub tumor: String,
    pub in_true_report: bool,
    pub pr_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub pair: String,
    pub mutation: String,
    pub tumor: String,
    pub mean_n: f64,
    /// Mean over replicates (with n > 0) of the TT fraction.
    pub mean_tt_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeReplicateRow {
    pub replicate: usize,
    pub pair: String,
    pub method: Method,
    pub arm: Option<Arm>,
    pub abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeSummaryRow {
    /// A pair label, or `ALL` for the mean over pairs.
    pub pair: String,
    pub method: Method,
    pub mean_abs_error: Option<f64>,
    pub n_reps: usize,
}

/// Base tables of one simulated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTables {
    pub scenario: String,
    pub replicates: Vec<ReplicateRow>,
    pub pairs: Vec<ReplicatePairRow>,
    pub truth: Vec<TruthRow>,
    pub te: Vec<TeReplicateRow>,
}

/// Tables derived from [`RunTables`].
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub summary: SummaryRow,
    pub pr_a: Vec<PrARow>,
    pub allocation: Vec<AllocationRow>,
    pub te_summary: Vec<TeSummaryRow>,
}

pub fn parse_pair(panel: &Panel, label: &str) -> Result<Pair> {
    let (m, t) = label
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("bad pair label {label:?}")))?;
    Ok(panel.pair(m, t)?)
}

fn te_arm(rep: &basket_core::simulator::RepResult, pair: Pair, method: Method) -> Option<Arm> {
    let t = rep.te.iter().find(|t| t.pair == pair)?;
    match method {
        Method::Ours => Some(if rep.report.is_overall() || rep.report.contains(&pair) {
            Arm::Targeted
        } else {
            Arm::Other
        }),
        Method::Naive => Some(t.naive.best_arm()),
        Method::Separate => t.separate.map(|s| s.best_arm()),
    }
}

impl RunTables {
    pub fn from_run(run: &SimulationRun, panel: &Panel, scenario: &str) -> Self {
        let replicates = run
            .results
            .iter()
            .map(|r| ReplicateRow {
                replicate: r.replicate,
                seed: r.seed,
                report: panel.report_label(&r.report),
                p_h0: r.summary.p_h0,
                p_h1: r.summary.p_h1,
                horizon: r.horizon,
                n_censored: r.n_censored,
                mean_clusters: r.mean_clusters,
            })
            .collect();
        let mut pairs = Vec::new();
        for r in &run.results {
            for a in &r.allocation {
                let s = r.summary.pairs.iter().find(|p| p.pair == a.pair);
                pairs.push(ReplicatePairRow {
                    replicate: r.replicate,
                    pair: panel.pair_label(a.pair),
                    n: a.n,
                    n_targeted: a.n_targeted,
                    eligible: s.is_some_and(|s| s.eligible),
                    contribution: s.map(|s| s.contribution),
                    mean_log_hr: s.map(|s| s.mean_log_hr),
                });
            }
        }
        let truth = panel
            .all_pairs()
            .into_iter()
            .map(|p| TruthRow {
                pair: panel.pair_label(p),
                population: run.truth.population[p.mutation][p.tumor],
                eligible: run.eligible.contains(&p),
                in_true_report: run.true_report.contains(&p),
            })
            .collect();
        let mut te = Vec::new();
        for r in &run.results {
            for method in Method::ALL {
                for (pair, err) in te_errors(r, method) {
                    te.push(TeReplicateRow {
                        replicate: r.replicate,
                        pair: panel.pair_label(pair),
                        method,
                        arm: te_arm(r, pair, method),
                        abs_error: err,
                    });
                }
            }
        }
        Self { scenario: scenario.to_string(), replicates, pairs, truth, te }
    }

    pub fn reports(&self, panel: &Panel) -> Result<Vec<Report>> {
        self.replicates.iter().map(|r| Ok(panel.parse_report(&r.report)?)).collect()
    }

    /// Decision summaries per replicate, enough to re-decide under other (u0, u1).
    pub fn decision_summaries(&self, panel: &Panel) -> Result<Vec<DecisionSummary>> {
        self.replicates
            .iter()
            .map(|r| {
                let pairs = self
                    .pairs
                    .iter()
                    .filter(|p| p.replicate == r.replicate)
                    .filter_map(|p| match (p.contribution, p.mean_log_hr) {
                        (Some(contribution), Some(mean_log_hr)) => Some((p, contribution, mean_log_hr)),
                        _ => None,
                    })
                    .map(|(p, contribution, mean_log_hr)| {
                        Ok(PairSummary {
                            pair: parse_pair(panel, &p.pair)?,
                            size: p.n,
                            eligible: p.eligible,
                            contribution,
                            mean_log_hr,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(DecisionSummary { p_h0: r.p_h0, p_h1: r.p_h1, pairs })
            })
            .collect()
    }

    /// Recomputes every derived table.
    pub fn derive(&self, panel: &Panel, true_report: &Report) -> Result<Derived> {
        let reports = self.reports(panel)?;
        let all = panel.all_pairs();
        let eligible: Vec<Pair> = self
            .truth
            .iter()
            .filter(|t| t.eligible)
            .map(|t| parse_pair(panel, &t.pair))
            .collect::<Result<_>>()?;
        let populated: Vec<Pair> = self
            .truth
            .iter()
            .filter(|t| t.population > 0)
            .map(|t| parse_pair(panel, &t.pair))
            .collect::<Result<_>>()?;
        let oc = OperatingChars::from_reports(&reports, true_report, &eligible, &populated);
        let summary = SummaryRow {
            scenario: self.scenario.clone(),
            n_reps: oc.n_reps,
            true_report: panel.report_label(true_report),
            tie: oc.tie,
            tsr: oc.tsr,
            tpr: oc.tpr,
            fsr: oc.fsr,
            fnr: oc.fnr,
            fpr: oc.fpr,
        };
        let pr_a = oc
            .pr_a
            .iter()
            .map(|(p, v)| PrARow {
                pair: panel.pair_label(*p),
                mutation: panel.aberrations[p.mutation].clone(),
                tumor: panel.tumors[p.tumor].clone(),
                in_true_report: true_report.contains(p),
                pr_a: *v,
            })
            .collect();

        let n_reps = self.replicates.len();
        let allocation = all
            .iter()
            .map(|&p| {
                let label = panel.pair_label(p);
                let rows: Vec<&ReplicatePairRow> = self.pairs.iter().filter(|r| r.pair == label).collect();
                let fracs: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.n > 0)
                    .map(|r| r.n_targeted as f64 / r.n as f64)
                    .collect();
                AllocationRow {
                    pair: label,
                    mutation: panel.aberrations[p.mutation].clone(),
                    tumor: panel.tumors[p.tumor].clone(),
                    mean_n: rows.iter().map(|r| r.n as f64).sum::<f64>() / n_reps.max(1) as f64,
                    mean_tt_fraction: (!fracs.is_empty()).then(|| fracs.iter().sum::<f64>() / fracs.len() as f64),
                }
            })
            .collect();

        let mut te_summary = Vec::new();
        for method in Method::ALL.into_iter().filter(|_| !self.te.is_empty()) {
            let mut per_pair = Vec::new();
            for &p in &all {
                let label = panel.pair_label(p);
                let vals: Vec<f64> = self
                    .te
                    .iter()
                    .filter(|t| t.method == method && t.pair == label)
                    .filter_map(|t| t.abs_error)
                    .collect();
                if !self.te.iter().any(|t| t.method == method && t.pair == label) {
                    continue;
                }
                let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
                per_pair.push(mean);
                te_summary.push(TeSummaryRow { pair: label, method, mean_abs_error: mean, n_reps: vals.len() });
            }
            let defined: Vec<f64> = per_pair.iter().flatten().copied().collect();
            te_summary.push(TeSummaryRow {
                pair: "ALL".into(),
                method,
                mean_abs_error: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
                n_reps,
            });
        }
        Ok(Derived { summary, pr_a, allocation, te_summary })
    }

    pub fn write(&self, dir: &Path, with_te: bool) -> Result<Vec<String>> {
        let mut written = vec![
            write_csv(dir, REPLICATES, &self.replicates)?,
            write_csv(dir, REPLICATE_PAIRS, &self.pairs)?,
            write_csv(dir, TRUTH, &self.truth)?,
        ];
        if with_te {
            written.push(write_csv(dir, TE_REPLICATES, &self.te)?);
        }
        Ok(written)
    }

    /// Reads base tables back. TE records are optional.
    pub fn read(dir: &Path, scenario: &str) -> Result<Self> {
        let te_path = dir.join(TE_REPLICATES);
        Ok(Self {
            scenario: scenario.to_string(),
            replicates: read_csv(dir, REPLICATES)?,
            pairs: read_csv(dir, REPLICATE_PAIRS)?,
            truth: read_csv(dir, TRUTH)?,
            te: if te_path.exists() { read_csv(dir, TE_REPLICATES)? } else { Vec::new() },
        })
    }
}

impl Derived {
    pub fn write(&self, dir: &Path, with_te: bool) -> Result<Vec<String>> {
        let mut written = vec![
            write_csv(dir, SUMMARY, std::slice::from_ref(&self.summary))?,
            write_csv(dir, PR_A, &self.pr_a)?,
            self.write_pr_a_matrix(dir)?,
            write_csv(dir, ALLOCATION, &self.allocation)?,
        ];
        if with_te {
            written.push(write_csv(dir, TE_SUMMARY, &self.te_summary)?);
        }
        Ok(written)
    }

    /// Pr(a) with aberrations as rows and tumor types as columns; `NA` for empty pairs.
    fn write_pr_a_matrix(&self, dir: &Path) -> Result<String> {
        let mut rows: Vec<&str> = Vec::new();
        let mut cols: Vec<&str> = Vec::new();
        for r in &self.pr_a {
            if !rows.contains(&r.mutation.as_str()) {
                rows.push(&r.mutation);
            }
            if !cols.contains(&r.tumor.as_str()) {
                cols.push(&r.tumor);
            }
        }
        let mut w = csv::Writer::from_writer(File::create(dir.join(PR_A_MATRIX))?);
        w.write_record(std::iter::once("aberration").chain(cols.iter().copied()))?;
        for m in &rows {
            let mut rec = vec![m.to_string()];
            for t in &cols {
                let v = self.pr_a.iter().find(|r| r.mutation == *m && r.tumor == *t);
                rec.push(v.map_or_else(|| "NA".to_string(), |r| r.pr_a.to_string()));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(PR_A_MATRIX.to_string())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let summary: Vec<SummaryRow> = read_csv(dir, SUMMARY)?;
        let summary = summary.into_iter().next().ok_or_else(|| CliError::Output {
            path: dir.join(SUMMARY).display().to_string(),
            msg: "no summary row".into(),
        })?;
        let te_path = dir.join(TE_SUMMARY);
        Ok(Self {
            summary,
            pr_a: read_csv(dir, PR_A)?,
            allocation: read_csv(dir, ALLOCATION)?,
            te_summary: if te_path.exists() { read_csv(dir, TE_SUMMARY)? } else { Vec::new() },
        })
    }

    pub fn te(&self, pair: &str, method: Method) -> Option<f64> {
        self.te_summary.iter().find(|r| r.pair == pair && r.method == method).and_then(|r| r.mean_abs_error)
    }

    pub fn tt_fraction(&self, pair: &str) -> Option<f64> {
        self.allocation.iter().find(|r| r.pair == pair).and_then(|r| r.mean_tt_fraction)
    }
}

/// Writes `rows` to `dir/name` and returns `name`.
pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(File::create(dir.join(name))?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(name.to_string())
}

pub fn read_csv<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let path = dir.join(name);
    let mut rdr = csv::Reader::from_path(&path)?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| CliError::Output { path: path.display().to_string(), msg: e.to_string() })
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<String> {
    File::create(dir.join(name))?.write_all(text.as_bytes())?;
    Ok(name.to_string())
}
