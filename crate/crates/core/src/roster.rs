//! Delimited-text patient rosters.
//!
//! Header: `id`, one column per aberration (`0`/`1`/`NA`), `tumor`, `arm`, `time`, `censored`.
//! `arm`, `time` and `censored` may be empty for patients not yet allocated or observed.

use std::io::{Read, Write};

use crate::domain::{Arm, MutationProfile, Outcome, Panel, Patient, Status};
use crate::error::{Error, Result};

pub fn header(panel: &Panel) -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend(panel.aberrations.iter().cloned());
    h.extend(["tumor", "arm", "time", "censored"].map(String::from));
    h
}

pub fn write_roster<W: Write>(writer: W, panel: &Panel, patients: &[Patient]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(panel))?;
    for p in patients {
        let mut row = vec![p.id.to_string()];
        row.extend((0..panel.q()).map(|j| p.mutations.get(j).label().to_string()));
        row.push(panel.tumors[p.tumor].clone());
        row.push(p.arm().map(|a| a.label().to_string()).unwrap_or_default());
        match p.outcome() {
            Some(o) => {
                row.push(format!("{}", o.time()));
                row.push(if o.censored() { "1" } else { "0" }.to_string());
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a roster, collecting every offending row before failing.
pub fn read_roster<R: Read>(reader: R, panel: &Panel) -> Result<Vec<Patient>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let expected = header(panel);
    let got: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if got != expected {
        return Err(Error::Roster(vec![format!(
            "header mismatch: expected {:?}, found {:?}",
            expected.join(","),
            got.join(",")
        )]));
    }

    let q = panel.q();
    let mut patients = Vec::new();
    let mut problems = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        match parse_row(&rec, panel, q) {
            Ok(p) => {
                if !seen_ids.insert(p.id) {
                    problems.push(format!("line {line}: duplicate id {}", p.id));
                }
                patients.push(p);
            }
            Err(msg) => problems.push(format!("line {line}: {msg}")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Roster(problems));
    }
    Ok(patients)
}

fn parse_row(rec: &csv::StringRecord, panel: &Panel, q: usize) -> std::result::Result<Patient, String> {
    let field = |i: usize| rec.get(i).unwrap_or("");
    let id: usize = field(0).parse().map_err(|_| format!("bad id {:?}", field(0)))?;
    let mut entries = Vec::with_capacity(q);
    for j in 0..q {
        let s = field(1 + j);
        entries.push(
            Status::parse(s)
                .ok_or_else(|| format!("aberration {} must be 0, 1 or NA, got {s:?}", panel.aberrations[j]))?,
        );
    }
    let tumor_name = field(1 + q);
    let tumor = panel
        .tumor_index(tumor_name)
        .ok_or_else(|| format!("unknown tumor type {tumor_name:?}"))?;
    let mut patient = Patient::new(id, MutationProfile::new(entries), tumor);

    let arm = field(2 + q);
    if !arm.is_empty() {
        let a = Arm::parse(arm).ok_or_else(|| format!("arm must be TT or O, got {arm:?}"))?;
        patient.assign(a).map_err(|e| e.to_string())?;
    }

    let time = field(3 + q);
    let censored = field(4 + q);
    match (time.is_empty(), censored.is_empty()) {
        (true, true) => {}
        (false, _) => {
            let t: f64 = time.parse().map_err(|_| format!("bad time {time:?}"))?;
            let c = match censored {
                "" | "0" => false,
                "1" => true,
                other => return Err(format!("censored must be 0 or 1, got {other:?}")),
            };
            patient.set_outcome(Some(Outcome::new(t, c).map_err(|e| e.to_string())?));
        }
        (true, false) => return Err("censoring flag without a time".to_string()),
    }
    Ok(patient)
}
