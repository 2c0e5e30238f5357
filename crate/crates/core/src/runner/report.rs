//! JSON and CSV renderings of an experiment outcome.

use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use super::config::Settings;
use super::experiments::Outcome;
use crate::error::Result;
use crate::verify::DefectReport;

pub fn verdict_label(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "fail"
    }
}

pub fn to_json(settings: &Settings, outcome: &Outcome, timestamp: bool) -> Result<Value> {
    let mut v = json!({
        "experiment": settings.experiment,
        "config_echo": settings,
        "reports": outcome.reports,
        "checks": outcome.checks,
        "traces": outcome.traces,
        "tables": outcome.tables,
        "verdict": verdict_label(outcome.passed()),
    });
    if timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        v["timestamp"] = json!(secs);
    }
    Ok(v)
}

pub fn render_json(settings: &Settings, outcome: &Outcome, timestamp: bool) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&to_json(settings, outcome, timestamp)?)?;
    s.push('\n');
    Ok(s)
}

const CSV_HEADER: [&str; 13] = [
    "experiment",
    "functional",
    "n",
    "p",
    "q",
    "eps",
    "delta",
    "sup",
    "bound",
    "tolerance",
    "satisfied",
    "samples",
    "witness",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn witness(w: &[Vec<f64>]) -> String {
    w.iter()
        .map(|pt| pt.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
        .collect::<Vec<_>>()
        .join("|")
}

fn report_row(experiment: &str, r: &DefectReport) -> Vec<String> {
    vec![
        experiment.to_string(),
        r.functional.clone(),
        opt(r.n),
        opt(r.p),
        opt(r.q),
        opt(r.eps),
        opt(r.delta),
        r.sup_value.to_string(),
        opt(r.bound),
        r.tolerance.to_string(),
        r.satisfied.to_string(),
        r.samples.to_string(),
        witness(&r.witness),
    ]
}

/// One row per defect report, then one row per check with the check's
/// outcome in `satisfied` and its detail in `witness`.
pub fn render_csv(settings: &Settings, outcome: &Outcome) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &outcome.reports {
        w.write_record(report_row(&settings.experiment, r))?;
    }
    for c in &outcome.checks {
        let mut row = vec![String::new(); CSV_HEADER.len()];
        row[0] = settings.experiment.clone();
        row[1] = c.name.clone();
        row[10] = c.passed.to_string();
        row[12] = c.detail.clone();
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
