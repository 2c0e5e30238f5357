//! The built-in experiments.

use std::f64::consts::LN_2;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{resolve_algebra, Settings};
use crate::algebra::{Algebra, Element};
use crate::counterexamples::{
    build_luminet_map, build_nilpotent_algebra, candidate_gap_profile, divergence_profile,
    every_linear_is_4derivation, luminet_oracle_distance, power_ideal_dim, premise_report,
};
use crate::direct::{build_limit_map, direct_limit, Growth, IterationTrace, Schedule, Verdict};
use crate::error::{Error, Result};
use crate::maps::{make_perturbed_hom, make_power_perturbed_hom, MapSpec, Mapping, Perturbation, Target, DEFAULT_QUANTIZATION};
use crate::oracle::cross_validate;
use crate::rng::{stream, stream_rng};
use crate::verify::{
    cauchy_ratio, check_der_hypotheses, check_hom_hypotheses, check_hyers_bound, check_rassias_bound, der_ratio,
    hom_ratio, mixed_product_check, orthogonality_check, tuples_of, DefectReport, Grid, LeibnizWeight, Sup,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    HyersHom,
    RassiasHom,
    RassiasDerSum,
    RassiasDerProd,
    Luminet,
    Nilpotent,
    OracleCrosscheck,
}

pub const CATALOG: [Experiment; 7] = [
    Experiment::HyersHom,
    Experiment::RassiasHom,
    Experiment::RassiasDerSum,
    Experiment::RassiasDerProd,
    Experiment::Luminet,
    Experiment::Nilpotent,
    Experiment::OracleCrosscheck,
];

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::HyersHom => "hyers-hom",
            Experiment::RassiasHom => "rassias-hom",
            Experiment::RassiasDerSum => "rassias-der-sum",
            Experiment::RassiasDerProd => "rassias-der-prod",
            Experiment::Luminet => "luminet",
            Experiment::Nilpotent => "nilpotent",
            Experiment::OracleCrosscheck => "oracle-crosscheck",
        }
    }

    /// The statement the experiment exercises.
    pub fn tag(self) -> &'static str {
        match self {
            Experiment::HyersHom => "bounded-defect stability of n-ring homomorphisms",
            Experiment::RassiasHom => "power-weighted stability of n-ring homomorphisms",
            Experiment::RassiasDerSum => "n-ring derivations, sum-of-powers Leibniz defect",
            Experiment::RassiasDerProd => "n-ring derivations, product-of-powers Leibniz defect",
            Experiment::Luminet => "failure at p = 1: the x ln|x| counterexample",
            Experiment::Nilpotent => "nilpotent algebra: every linear map is a 4-ring derivation",
            Experiment::OracleCrosscheck => "direct-method limit against the Chebyshev oracle",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        if name == "hyers-bounded" {
            return Ok(Experiment::HyersHom);
        }
        CATALOG
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown experiment {name:?}")))
    }
}

/// A pass/fail assertion that is not a bound on a sampled sup.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.into(), passed, detail }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Outcome {
    pub reports: Vec<DefectReport>,
    pub checks: Vec<Check>,
    pub traces: Vec<IterationTrace>,
    pub tables: serde_json::Map<String, Value>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.satisfied) && self.checks.iter().all(|c| c.passed)
    }

    /// Turns a divergent limit into a failing row instead of an error.
    fn absorb(&mut self, err: Error) -> Result<()> {
        match err {
            Error::LimitDiverged { point, trace } => {
                self.checks.push(Check::new(
                    "limit_convergence",
                    false,
                    match &trace.verdict {
                        Verdict::Inconclusive => format!(
                            "direct method inconclusive at {point:?} by m_max = {}; raise m_max or tol",
                            trace.schedule.m_max
                        ),
                        v => format!("direct method did not converge at {point:?}: {v:?}"),
                    },
                ));
                self.traces.push(*trace);
                Ok(())
            }
            other => Err(other),
        }
    }
}

pub fn run_experiment(exp: Experiment, s: &Settings) -> Result<Outcome> {
    match exp {
        Experiment::HyersHom => hyers_hom(s),
        Experiment::RassiasHom => rassias_hom(s),
        Experiment::RassiasDerSum => rassias_der(s, false),
        Experiment::RassiasDerProd => rassias_der(s, true),
        Experiment::Luminet => luminet(s),
        Experiment::Nilpotent => nilpotent(s),
        Experiment::OracleCrosscheck => oracle_crosscheck(s),
    }
}

fn schedule(s: &Settings, growth: Growth) -> Result<Schedule> {
    Schedule::new(s.schedule, s.s, s.m_max, s.tol)?.with_budget(growth)
}

fn grid(alg: &Algebra, s: &Settings) -> Grid {
    Grid::lattice_and_ball(alg, s.grid_radius, s.grid_random, s.grid_seed)
}

/// `x ↦ ±x E11` into `M_k`, an exact `n`-ring homomorphism for the sign
/// `(−1)^{n+1}`; with `n` odd it is not a 2-ring homomorphism.
pub fn corner_homomorphism(codomain: &Arc<Algebra>, n: usize) -> Result<MapSpec> {
    let units = codomain.embedding().and_then(|e| e.units.clone());
    let e11 = units
        .as_ref()
        .and_then(|u| u.iter().position(|&x| x == (0, 0)))
        .filter(|_| codomain.dim() >= 4)
        .ok_or_else(|| Error::Config(format!("codomain {} must be a full matrix algebra M_k, k ≥ 2", codomain.name())))?;
    let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
    let mut image = vec![0.0; codomain.dim()];
    image[e11] = sign;
    let r = Arc::new(Algebra::reals());
    Ok(MapSpec::from_basis_images(r, Target::Algebra(codomain.clone()), &[image])?.labeled("corner"))
}

fn limit_hom_defect(h: &MapSpec, n: usize, grid: &Grid, tol: f64) -> Result<DefectReport> {
    let mut r = hom_ratio(h, 0.0, n, Some(0.0), grid)?.with_tolerance(tol);
    r.functional = "limit_hom_defect".into();
    Ok(r)
}

fn trace_at(f: &MapSpec, a: &Element, sched: &Schedule) -> Result<IterationTrace> {
    direct_limit(f, a, sched)
}

fn hyers_hom(s: &Settings) -> Result<Outcome> {
    let cod = resolve_algebra(&s.codomain)?;
    let h0 = corner_homomorphism(&cod, s.n)?;
    let f = make_perturbed_hom(&h0, s.n, s.eps, DEFAULT_QUANTIZATION, s.seed)?;
    let sched = schedule(s, Growth::Bounded { eps: s.eps })?;
    let dom = f.domain_arc().clone();
    let g = grid(&dom, s);
    let delta = s.delta.unwrap_or(s.eps + s.eps.powi(s.n as i32));

    let mut out = Outcome::default();
    let mut premise = cauchy_ratio(&f, 0.0, Some(1.5 * s.eps), &g)?;
    premise.functional = "cauchy_premise".into();
    let mut product = hom_ratio(&f, 0.0, s.n, Some(delta), &g)?;
    product.functional = "product_premise".into();
    out.reports.extend([premise, product]);

    out.traces.push(trace_at(&f, &dom.basis(0), &sched)?);
    let h = match build_limit_map(&f, &sched, &dom.basis_elements()) {
        Ok(h) => h,
        Err(e) => {
            out.absorb(e)?;
            return Ok(out);
        }
    };
    let limit_tol = 10.0 * s.tol;
    out.reports.push(check_hyers_bound(&f, &h, s.eps, &g)?);
    out.reports.push(limit_hom_defect(&h, s.n, &g, crate::verify::LIMIT_TOL)?);
    let tuples = tuples_of(&g, s.n, 512);
    out.reports.push(orthogonality_check(&f, &h, &tuples, 1..=s.n - 1)?);
    out.reports.push(mixed_product_check(&f, &h, &tuples, 1..=s.n - 1)?);
    out.tables.insert("limit_linear_part".into(), json!(h.base_linear()));
    out.tables.insert("limit_tolerance".into(), json!(limit_tol));
    Ok(out)
}

/// Cauchy constant of power noise of amplitude 1: `‖a+b‖^p` is at most
/// `‖a‖^p + ‖b‖^p` for `p ≤ 1` and `2^{p−1}(‖a‖^p + ‖b‖^p)` above.
pub fn power_envelope(p: f64) -> f64 {
    1.0 + (p - 1.0).exp2().max(1.0)
}

fn rassias_hom(s: &Settings) -> Result<Outcome> {
    let cod = resolve_algebra(&s.codomain)?;
    let h0 = corner_homomorphism(&cod, s.n)?;
    let f = make_power_perturbed_hom(&h0, s.n, s.eps, s.p, DEFAULT_QUANTIZATION, s.seed)?;
    let eps = s.eps * power_envelope(s.p);
    let delta = s.delta.unwrap_or(s.eps + s.eps.powi(s.n as i32));
    let sched = schedule(s, Growth::Power { eps, p: s.p })?;
    let dom = f.domain_arc().clone();
    let g = grid(&dom, s);

    let mut out = Outcome::default();
    let (c, h) = check_hom_hypotheses(&f, eps, delta, s.p, s.q, s.n, &g)?;
    out.reports.extend([c, h]);
    out.traces.push(trace_at(&f, &dom.basis(0), &sched)?);
    let lim = match build_limit_map(&f, &sched, &dom.basis_elements()) {
        Ok(h) => h,
        Err(e) => {
            out.absorb(e)?;
            return Ok(out);
        }
    };
    out.reports.push(check_rassias_bound(&f, &lim, eps, s.p, &g)?.with_tolerance(10.0 * s.tol));
    out.reports.push(limit_hom_defect(&lim, s.n, &g, 10.0 * s.tol)?);
    out.tables.insert("declared_eps".into(), json!(eps));
    out.tables.insert("declared_delta".into(), json!(delta));
    out.tables.insert("limit_linear_part".into(), json!(lim.base_linear()));
    Ok(out)
}

fn rassias_der(s: &Settings, product: bool) -> Result<Outcome> {
    let alg = resolve_algebra(&s.algebra)?;
    let mut rng = stream_rng(s.seed, stream::TRIALS);
    let m = alg.element((0..alg.dim()).map(|_| rng.sample(StandardNormal)).collect())?;
    let d0 = MapSpec::inner_derivation(alg.clone(), &m)?;
    let f = d0.clone().with_perturbation(Perturbation::PowerNoise {
        eps: s.eps,
        p: s.p,
        quantization_step: DEFAULT_QUANTIZATION,
        seed: s.seed,
        support: None,
    })?;
    // on the unit ball the Leibniz defect of the noise is at most 2η Σ‖a_i‖^p,
    // or (n+1)η Π‖a_i‖^p for the product weight with p < 1
    let cauchy_need = s.eps * power_envelope(s.p);
    let (weight, leibniz_need) = if product {
        (LeibnizWeight::ProductOfPowers { q: s.q }, (s.n as f64 + 1.0) * s.eps)
    } else {
        (LeibnizWeight::SumOfPowers, 2.0 * s.eps)
    };
    let eps = cauchy_need.max(leibniz_need);
    let sched = schedule(s, Growth::Power { eps, p: s.p })?;
    let g = grid(&alg, s);

    let mut out = Outcome::default();
    let (c, l) = check_der_hypotheses(&f, eps, s.p, s.n, weight, &g)?;
    out.reports.extend([c, l]);
    out.traces.push(trace_at(&f, &alg.basis(0), &sched)?);
    let d = match build_limit_map(&f, &sched, &alg.basis_elements()) {
        Ok(d) => d,
        Err(e) => {
            out.absorb(e)?;
            return Ok(out);
        }
    };
    out.reports.push(check_rassias_bound(&f, &d, eps, s.p, &g)?.with_tolerance(10.0 * s.tol));
    let mut exact = der_ratio(&d, s.p, s.n, LeibnizWeight::ProductOfPowers { q: 0.0 }, Some(0.0), &g)?
        .with_tolerance(10.0 * s.tol);
    exact.functional = "limit_der_defect".into();
    out.reports.push(exact);
    let gap: f64 = d
        .base_linear()
        .iter()
        .zip(d0.base_linear())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.tables.insert("declared_eps".into(), json!(eps));
    out.tables.insert("max_coefficient_gap_to_inner_derivation".into(), json!(gap));
    Ok(out)
}

fn luminet(s: &Settings) -> Result<Outcome> {
    let mut out = Outcome::default();
    let profile = divergence_profile(50)?;
    let fit = profile
        .rows
        .iter()
        .map(|&(m, v)| (v - m as f64 * LN_2).abs())
        .fold(0.0, f64::max);
    let doubling = (1..=25)
        .map(|m| (profile.rows[2 * m].1 / profile.rows[m].1 - 2.0).abs())
        .fold(0.0, f64::max);
    out.checks.push(Check::new(
        "profile_matches_m_ln2",
        fit <= 1e-9,
        format!("max |value(m) - m ln 2| = {fit:e} for m ≤ 50"),
    ));
    out.checks.push(Check::new(
        "profile_doubles",
        doubling <= 1e-9,
        format!("max |value(2m)/value(m) - 2| = {doubling:e}"),
    ));
    out.checks.push(Check::new(
        "direct_method_diverges",
        matches!(profile.verdict, Verdict::Diverged { .. }),
        format!("{:?}", profile.verdict),
    ));

    let r = Algebra::reals();
    let small = Grid::lattice_and_ball(&r, 32.0, s.grid_random, s.grid_seed);
    let large = Grid::lattice_and_ball(&r, 1024.0, s.grid_random, s.grid_seed);
    let (mut c_small, mut h_small) = premise_report(&small, s.n)?;
    let (mut c_large, mut h_large) = premise_report(&large, s.n)?;
    for (name, a, b) in [
        ("cauchy_premise_bounded", c_small.sup_value, c_large.sup_value),
        ("product_premise_bounded", h_small.sup_value, h_large.sup_value),
    ] {
        out.checks.push(Check::new(
            name,
            b <= 2.0 * a,
            format!("sup at radius 1024 = {b}, sup at radius 32 = {a}"),
        ));
    }
    for (r, radius) in [(&mut c_small, 32), (&mut h_small, 32), (&mut c_large, 1024), (&mut h_large, 1024)] {
        r.functional = format!("{}_radius_{radius}", r.functional);
    }
    out.reports.extend([c_small, h_small, c_large, h_large]);

    let d128 = luminet_oracle_distance(128)?.distance;
    let d512 = luminet_oracle_distance(512)?.distance;
    out.checks.push(Check::new(
        "oracle_distance_grows",
        d512 >= 1.5 * d128,
        format!("distance at N=128: {d128}, at N=512: {d512}"),
    ));

    let gaps = candidate_gap_profile(&[5, 10, 20, 40], &small)?;
    out.checks.push(Check::new(
        "candidate_gap_grows",
        gaps.windows(2).all(|w| w[1].1 > w[0].1),
        format!("{gaps:?}"),
    ));

    let f = build_luminet_map();
    out.traces.push(trace_at(&f, &f.domain().basis(0), &Schedule::dyadic(60, s.tol)?)?);
    out.tables.insert("divergence_profile".into(), json!(profile.rows));
    out.tables.insert("oracle_distance".into(), json!([[128, d128], [512, d512]]));
    out.tables.insert("candidate_gap".into(), json!(gaps));
    Ok(out)
}

fn nilpotent(s: &Settings) -> Result<Outcome> {
    let alg = build_nilpotent_algebra();
    let dims: Vec<usize> = (1..=4).map(|k| power_ideal_dim(&alg, k)).collect::<Result<_>>()?;
    let mut out = Outcome::default();
    out.checks.push(Check::new(
        "power_ideal_dims",
        dims == [6, 3, 1, 0],
        format!("dim A^k for k = 1..4: {dims:?}"),
    ));
    let rep = every_linear_is_4derivation(s.trials, s.seed);
    out.checks.push(Check::new(
        "two_fold_witness",
        rep.two_fold_witness.defect > 0.1,
        format!(
            "{} ↦ {} on ({}) has 2-fold defect {}",
            rep.two_fold_witness.source,
            rep.two_fold_witness.target,
            rep.two_fold_witness.tuple.join(", "),
            rep.two_fold_witness.defect
        ),
    ));
    out.reports.push(rep.four_fold);
    out.tables.insert("power_ideal_dims".into(), json!(dims));
    out.tables.insert("two_fold_witness".into(), serde_json::to_value(&rep.two_fold_witness)?);
    Ok(out)
}

fn oracle_crosscheck(s: &Settings) -> Result<Outcome> {
    let r = Arc::new(Algebra::reals());
    let one = r.basis(0);
    let f = make_perturbed_hom(&MapSpec::identity(r.clone()), 2, s.eps, DEFAULT_QUANTIZATION, s.seed)?;
    let sched = schedule(s, Growth::Bounded { eps: s.eps })?;
    let mut out = Outcome::default();
    let cv = match cross_validate(&f, &one, &sched, s.oracle_n, s.eps) {
        Ok(cv) => cv,
        Err(e) => {
            out.absorb(e)?;
            return Ok(out);
        }
    };
    let sup = Sup { value: cv.gap, witness: vec![cv.oracle.generator_image.clone(), cv.limit_at_generator.clone()], samples: 1 };
    out.reports.push(DefectReport::new("oracle_gap", sup, Some(cv.bound), cv.oracle.resolution + s.tol));

    let lin = MapSpec::linear(r.clone(), Target::Algebra(r.clone()), vec![3.0])?;
    let exact = cross_validate(&lin, &one, &Schedule::dyadic(s.m_max, s.tol)?, s.oracle_n, 0.0)?;
    let sup = Sup {
        value: exact.gap,
        witness: vec![exact.oracle.generator_image.clone(), exact.limit_at_generator.clone()],
        samples: 1,
    };
    out.reports.push(DefectReport::new("oracle_gap_exact_linear", sup, Some(0.0), 1e-15));
    out.traces.push(trace_at(&f, &one, &sched)?);
    out.tables.insert("oracle_distance".into(), json!(cv.oracle.distance));
    Ok(out)
}
