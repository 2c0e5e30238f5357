//! Flat TOML experiment configuration.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::experiments::Experiment;
use crate::algebra::Algebra;
use crate::counterexamples::build_nilpotent_algebra;
use crate::direct::ScheduleKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Configuration file as written; every key except `experiment` is optional
/// and falls back to the experiment's default.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub algebra: Option<String>,
    pub codomain: Option<String>,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub seed: Option<u64>,
    pub schedule: Option<ScheduleKind>,
    pub s: Option<i8>,
    pub m_max: Option<u64>,
    pub tol: Option<f64>,
    pub grid_radius: Option<f64>,
    pub grid_random: Option<usize>,
    pub grid_seed: Option<u64>,
    pub trials: Option<usize>,
    pub oracle_n: Option<u32>,
    pub output: Option<String>,
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        ExperimentConfig::parse(&text)
    }

    pub fn named(experiment: &str) -> Self {
        ExperimentConfig { experiment: experiment.into(), ..Default::default() }
    }

    /// Fills in defaults and validates parameter ranges.
    pub fn resolve(&self) -> Result<Settings> {
        let exp = Experiment::from_name(&self.experiment)?;
        let d = Settings::defaults(exp);
        let seed = self.seed.unwrap_or(d.seed);
        let p = self.p.unwrap_or(d.p);
        let settings = Settings {
            experiment: exp.name().into(),
            algebra: self.algebra.clone().unwrap_or(d.algebra),
            codomain: self.codomain.clone().unwrap_or(d.codomain),
            n: self.n.unwrap_or(d.n),
            eps: self.eps.unwrap_or(d.eps),
            delta: self.delta.or(d.delta),
            p,
            q: self.q.unwrap_or(p),
            seed,
            schedule: self.schedule.unwrap_or(d.schedule),
            s: self.s.unwrap_or(if p > 1.0 { -1 } else { 1 }),
            m_max: self.m_max.unwrap_or(d.m_max),
            tol: self.tol.unwrap_or(d.tol),
            grid_radius: self.grid_radius.unwrap_or(d.grid_radius),
            grid_random: self.grid_random.unwrap_or(d.grid_random),
            grid_seed: self.grid_seed.unwrap_or(seed),
            trials: self.trials.unwrap_or(d.trials),
            oracle_n: self.oracle_n.unwrap_or(d.oracle_n),
            output: self.output.clone(),
            format: self.format.unwrap_or_default(),
        };
        settings.validate(exp)?;
        Ok(settings)
    }
}

/// Fully resolved parameters; echoed verbatim in every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub experiment: String,
    pub algebra: String,
    pub codomain: String,
    pub n: usize,
    /// Noise amplitude of the perturbation.
    pub eps: f64,
    /// Declared product-defect constant; derived from `eps` when absent.
    pub delta: Option<f64>,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub schedule: ScheduleKind,
    pub s: i8,
    pub m_max: u64,
    pub tol: f64,
    pub grid_radius: f64,
    pub grid_random: usize,
    pub grid_seed: u64,
    pub trials: usize,
    pub oracle_n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub format: Format,
}

impl Settings {
    fn defaults(exp: Experiment) -> Settings {
        let mut s = Settings {
            experiment: exp.name().into(),
            algebra: "R".into(),
            codomain: "M2".into(),
            n: 3,
            eps: 0.5,
            delta: None,
            p: 0.5,
            q: 0.5,
            seed: 7,
            schedule: ScheduleKind::Dyadic,
            s: 1,
            m_max: 60,
            tol: 1e-8,
            grid_radius: 1.0,
            grid_random: 256,
            grid_seed: 7,
            trials: 100,
            oracle_n: 512,
            output: None,
            format: Format::Json,
        };
        match exp {
            Experiment::HyersHom => {
                s.tol = 0.5 * (-40f64).exp2();
            }
            Experiment::RassiasHom => {}
            Experiment::RassiasDerSum | Experiment::RassiasDerProd => {
                s.algebra = "M2".into();
                s.codomain = "M2".into();
                s.n = 2;
                s.eps = 0.1;
            }
            Experiment::Luminet => {
                s.codomain = "M3".into();
                s.tol = 1e-9;
            }
            Experiment::Nilpotent => {
                s.algebra = "UT4".into();
                s.codomain = "UT4".into();
                s.n = 4;
            }
            Experiment::OracleCrosscheck => {
                s.codomain = "R".into();
                s.tol = 1e-12;
            }
        }
        s
    }

    fn validate(&self, exp: Experiment) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return bad(format!("eps must be finite and nonnegative, got {}", self.eps));
        }
        if let Some(d) = self.delta {
            if !(d.is_finite() && d >= 0.0) {
                return bad(format!("delta must be finite and nonnegative, got {d}"));
            }
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.m_max < 1 {
            return bad("m_max must be at least 1".into());
        }
        if self.s != 1 && self.s != -1 {
            return bad(format!("s must be 1 or -1, got {}", self.s));
        }
        if !(self.grid_radius.is_finite() && self.grid_radius > 0.0) {
            return bad(format!("grid_radius must be positive, got {}", self.grid_radius));
        }
        let rassias = matches!(exp, Experiment::RassiasHom | Experiment::RassiasDerSum | Experiment::RassiasDerProd);
        if rassias {
            for (name, v) in [("p", self.p), ("q", self.q)] {
                if !(v.is_finite() && v >= 0.0) || v == 1.0 {
                    return bad(format!("unsupported exponent {name} = {v}: the Rassias bounds need {name} ≠ 1"));
                }
            }
            if (self.p < 1.0) != (self.q < 1.0) {
                return bad(format!("p = {} and q = {} must lie on the same side of 1", self.p, self.q));
            }
            let want = if self.p < 1.0 { 1 } else { -1 };
            if self.s != want {
                return bad(format!("s = {} does not match the sign of 1 - p for p = {}", self.s, self.p));
            }
        }
        if exp == Experiment::RassiasDerProd && self.p > 1.0 {
            return bad("rassias-der-prod supports p < 1 only".into());
        }
        if matches!(exp, Experiment::RassiasDerSum | Experiment::RassiasDerProd) && self.grid_radius > 1.0 {
            return bad("the derivation experiments sample the unit ball; grid_radius must be ≤ 1".into());
        }
        if exp == Experiment::OracleCrosscheck && self.oracle_n < crate::oracle::MIN_SAMPLES {
            return bad(format!("oracle_n must be at least {}", crate::oracle::MIN_SAMPLES));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        Ok(())
    }
}

/// `R`, `M<k>`, `UT4`, or a path to an algebra definition file.
pub fn resolve_algebra(spec: &str) -> Result<Arc<Algebra>> {
    let alg = match spec {
        "R" => Algebra::reals(),
        "UT4" => build_nilpotent_algebra(),
        s if s.starts_with('M') && s[1..].parse::<usize>().is_ok() => {
            let k: usize = s[1..].parse().expect("checked");
            if !(1..=8).contains(&k) {
                return Err(Error::Config(format!("matrix size {k} out of range 1..=8")));
            }
            Algebra::matrix(k)?
        }
        path => Algebra::load(path).map_err(|e| Error::Config(format!("algebra {path:?}: {e}")))?,
    };
    Ok(Arc::new(alg))
}
