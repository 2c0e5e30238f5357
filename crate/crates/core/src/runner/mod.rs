//! Configuration-driven experiment runner behind the command-line tool.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;

pub use config::{resolve_algebra, ExperimentConfig, Format, Settings};
pub use experiments::{run_experiment, Check, Experiment, Outcome, CATALOG};

use crate::error::{Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Exit code for an error escaping a run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::UnsupportedExponent(_) | Error::ScheduleMismatch | Error::InvalidSchedule(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_FAIL,
    }
}

/// A built-in experiment name or a path to a TOML configuration.
pub fn load_config(target: &str) -> Result<ExperimentConfig> {
    if Experiment::from_name(target).is_ok() && !Path::new(target).is_file() {
        Ok(ExperimentConfig::named(target))
    } else {
        ExperimentConfig::load(target)
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub settings: Settings,
    pub outcome: Outcome,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        self.outcome.passed()
    }

    pub fn render(&self, format: Format, timestamp: bool) -> Result<String> {
        match format {
            Format::Json => report::render_json(&self.settings, &self.outcome, timestamp),
            Format::Csv => report::render_csv(&self.settings, &self.outcome),
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    let settings = cfg.resolve()?;
    let exp = Experiment::from_name(&settings.experiment)?;
    let outcome = run_experiment(exp, &settings)?;
    Ok(RunResult { settings, outcome })
}

/// `name<TAB>tag` lines for every built-in experiment.
pub fn list_experiments() -> Vec<String> {
    CATALOG.iter().map(|e| format!("{}\t{}", e.name(), e.tag())).collect()
}

/// Maps available to the `limit` subcommand, all defined on `R`.
pub const LIMIT_MAPS: [&str; 3] = ["hyers", "luminet", "sine"];

pub fn limit_map(name: &str, seed: u64) -> Result<crate::maps::MapSpec> {
    use std::sync::Arc;

    use crate::algebra::Algebra;
    use crate::maps::{make_perturbed_hom, MapSpec, Perturbation, DEFAULT_QUANTIZATION};

    match name {
        "hyers" => {
            let m2 = Arc::new(Algebra::matrix(2)?);
            let h0 = experiments::corner_homomorphism(&m2, 3)?;
            make_perturbed_hom(&h0, 3, 0.5, DEFAULT_QUANTIZATION, seed)
        }
        "luminet" => Ok(crate::counterexamples::build_luminet_map()),
        "sine" => MapSpec::identity(Arc::new(Algebra::reals()))
            .with_perturbation(Perturbation::SineBump { amplitude: 1.0 })
            .map(|f| f.labeled("sine")),
        other => Err(Error::Config(format!("unknown map {other:?}; expected one of {LIMIT_MAPS:?}"))),
    }
}

/// Comma-separated coordinates, e.g. `1.5` or `0.25,-1`.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad coordinate {t:?}: {e}"))))
        .collect()
}

/// Direct-method trace of a named map at a point.
pub fn limit_trace(
    map: &str,
    point: &[f64],
    kind: crate::direct::ScheduleKind,
    m_max: u64,
    tol: f64,
    seed: u64,
) -> Result<crate::direct::IterationTrace> {
    use crate::maps::Mapping;

    let f = limit_map(map, seed)?;
    let a = f.domain().element(point.to_vec()).map_err(|e| Error::Config(e.to_string()))?;
    let mut sched = crate::direct::Schedule::new(kind, 1, m_max, tol).map_err(|e| Error::Config(e.to_string()))?;
    // the bounded maps carry their noise amplitude as a defect budget
    let budget = match map {
        "hyers" => Some(0.5),
        "sine" => Some(1.0),
        _ => None,
    };
    if let Some(eps) = budget {
        sched = sched.with_budget(crate::direct::Growth::Bounded { eps })?;
    }
    crate::direct::direct_limit(&f, &a, &sched)
}
