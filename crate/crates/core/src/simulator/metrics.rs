//! Operating characteristics over replicates and treatment-effect errors of the three designs.

use serde::{Deserialize, Serialize};

use super::trial::RepResult;
use crate::domain::{Pair, Report};

/// Frequentist error rates of the report; `None` where a rate does not apply to the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingChars {
    pub n_reps: usize,
    pub true_report: Report,
    pub tie: Option<f64>,
    pub tsr: Option<f64>,
    pub tpr: Option<f64>,
    pub fsr: Option<f64>,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
    /// Fraction of replicates reporting each pair.
    pub pr_a: Vec<(Pair, f64)>,
}

fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

impl OperatingChars {
    /// Rates from the replicate reports. TIE applies when the true report is A0, TPR when it
    /// is A1, and TSR, FSR, FNR, FPR when it is a set of pairs. FSR averages over the
    /// eligible pairs outside the true report.
    pub fn from_reports(reports: &[Report], true_report: &Report, eligible: &[Pair], pairs: &[Pair]) -> Self {
        let n = reports.len();
        let count = |f: &dyn Fn(&Report) -> bool| reports.iter().filter(|r| f(r)).count();
        let mut oc = Self {
            n_reps: n,
            true_report: true_report.clone(),
            tie: None,
            tsr: None,
            tpr: None,
            fsr: None,
            fnr: None,
            fpr: None,
            pr_a: pairs.iter().map(|&a| (a, fraction(count(&|r| r.contains(&a)), n))).collect(),
        };
        if n == 0 {
            return oc;
        }
        match true_report {
            Report::Null => oc.tie = Some(fraction(count(&|r| !r.is_null()), n)),
            Report::Overall => oc.tpr = Some(fraction(count(&|r| r.is_overall()), n)),
            Report::Pairs(set) => {
                let hits: usize = set.iter().map(|a| count(&|r| r.contains(a))).sum();
                oc.tsr = Some(fraction(hits, n * set.len()));
                let outside: Vec<&Pair> = eligible.iter().filter(|a| !set.contains(a)).collect();
                if !outside.is_empty() {
                    let false_hits: usize = outside.iter().map(|a| count(&|r| r.contains(a))).sum();
                    oc.fsr = Some(fraction(false_hits, n * outside.len()));
                }
                oc.fnr = Some(fraction(count(&|r| r.is_null()), n));
                oc.fpr = Some(fraction(count(&|r| r.is_overall()), n));
            }
        }
        oc
    }
}

/// Mean over replicates of each pair's TT allocation fraction.
pub fn mean_allocation(results: &[RepResult]) -> Vec<(Pair, Option<f64>)> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    first
        .allocation
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let fracs: Vec<f64> = results.iter().filter_map(|r| r.allocation[k].fraction()).collect();
            (a.pair, (!fracs.is_empty()).then(|| fracs.iter().sum::<f64>() / fracs.len() as f64))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Ours,
    Naive,
    Separate,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ours, Method::Naive, Method::Separate];

    pub fn label(self) -> &'static str {
        match self {
            Method::Ours => "OURS",
            Method::Naive => "NAIVE",
            Method::Separate => "SEPARATE",
        }
    }
}

/// |TÊ_a − TE_a| per pair at the method's chosen arm; `None` for an inestimable SEPARATE stratum.
/// OURS treats with TT exactly the pairs it reports (everyone under A1).
pub fn te_errors(rep: &RepResult, method: Method) -> Vec<(Pair, Option<f64>)> {
    rep.te
        .iter()
        .map(|t| {
            let err = match method {
                Method::Ours => {
                    let tt = rep.report.is_overall() || rep.report.contains(&t.pair);
                    Some(if tt {
                        (t.ours_targeted - t.true_targeted).abs()
                    } else {
                        (t.ours_other - t.true_other).abs()
                    })
                }
                Method::Naive | Method::Separate => {
                    let fit = if method == Method::Naive { Some(t.naive) } else { t.separate };
                    fit.map(|f| {
                        let arm = f.best_arm();
                        let truth = match arm {
                            crate::domain::Arm::Other => t.true_other,
                            crate::domain::Arm::Targeted => t.true_targeted,
                        };
                        (f.get(arm).expected_time() - truth).abs()
                    })
                }
            };
            (t.pair, err)
        })
        .collect()
}

/// Mean error per pair over replicates (inestimable entries skipped), then the mean over pairs.
pub fn mean_te_error(results: &[RepResult], method: Method) -> (Vec<(Pair, Option<f64>)>, f64) {
    let Some(first) = results.first() else {
        return (Vec::new(), f64::NAN);
    };
    let per_rep: Vec<Vec<(Pair, Option<f64>)>> = results.iter().map(|r| te_errors(r, method)).collect();
    let per_pair: Vec<(Pair, Option<f64>)> = first
        .te
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let vals: Vec<f64> = per_rep.iter().filter_map(|e| e[k].1).collect();
            (t.pair, (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect();
    let defined: Vec<f64> = per_pair.iter().filter_map(|(_, v)| *v).collect();
    let overall = defined.iter().sum::<f64>() / defined.len() as f64;
    (per_pair, overall)
}
