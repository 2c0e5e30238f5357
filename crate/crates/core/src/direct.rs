//! The direct method: rescaled iterates `h_m(a) = μ^-s f(μ^s a)` with
//! `μ = 2^m` (dyadic) or `μ = m` (integer), plus convergence and divergence
//! certification.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::Element;
use crate::error::{Error, Result};
use crate::maps::{MapSpec, Mapping, Target};
use crate::algebra::Algebra;
use crate::rng::{stream, stream_rng};

/// Largest dyadic exponent allowed when arguments grow.
pub const DYADIC_GROWTH_CAP: u64 = 60;
/// Largest dyadic exponent allowed when arguments shrink.
pub const DYADIC_SHRINK_CAP: u64 = 1000;
/// Largest integer multiplier.
pub const INTEGER_CAP: u64 = 1_000_000_000_000_000;

const BLOWUP_FACTOR: f64 = 1e6;
const DIVERGENCE_WINDOW: usize = 8;
const LIMIT_CHECK_POINTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Dyadic,
    Integer,
}

/// A-priori growth of the defect, used to turn the analytic tail estimate
/// into a stopping rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Growth {
    /// `‖f(a+b) − f(a) − f(b)‖ ≤ eps`.
    Bounded { eps: f64 },
    /// `‖f(a+b) − f(a) − f(b)‖ ≤ eps (‖a‖^p + ‖b‖^p)`.
    Power { eps: f64, p: f64 },
}

impl Growth {
    fn validate(&self) -> Result<()> {
        let eps = match *self {
            Growth::Bounded { eps } => eps,
            Growth::Power { eps, p } => {
                if !(p.is_finite() && p >= 0.0) || p == 1.0 {
                    return Err(Error::UnsupportedExponent(p));
                }
                eps
            }
        };
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidEps(eps));
        }
        Ok(())
    }

    /// Schedule sign the growth requires: `(1−p)/|1−p|`, and `+1` when bounded.
    pub fn sign(&self) -> Result<i8> {
        self.validate()?;
        Ok(match *self {
            Growth::Bounded { .. } => 1,
            Growth::Power { p, .. } => {
                if p < 1.0 {
                    1
                } else {
                    -1
                }
            }
        })
    }
}

/// Constant of the Rassias estimate, `2/|2 − 2^p|`.
pub fn rassias_constant(p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 0.0) || p == 1.0 {
        return Err(Error::UnsupportedExponent(p));
    }
    Ok(2.0 / (2.0 - p.exp2()).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub s: i8,
    pub m_max: u64,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Growth>,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, s: i8, m_max: u64, tol: f64) -> Result<Self> {
        let sched = Schedule { kind, s, m_max, tol, budget: None };
        sched.validate()?;
        Ok(sched)
    }

    pub fn dyadic(m_max: u64, tol: f64) -> Result<Self> {
        Schedule::new(ScheduleKind::Dyadic, 1, m_max, tol)
    }

    /// Attaches a defect budget; its exponent must agree with `s`.
    pub fn with_budget(mut self, growth: Growth) -> Result<Self> {
        if growth.sign()? != self.s {
            return Err(Error::ScheduleMismatch);
        }
        self.budget = Some(growth);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s != 1 && self.s != -1 {
            return Err(Error::InvalidSchedule(format!("s must be +1 or -1, got {}", self.s)));
        }
        if self.m_max < 1 {
            return Err(Error::InvalidSchedule("m_max must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidSchedule(format!("tol must be positive, got {}", self.tol)));
        }
        if let Some(g) = &self.budget {
            if g.sign()? != self.s {
                return Err(Error::ScheduleMismatch);
            }
        }
        Ok(())
    }

    /// First index of the schedule.
    pub fn m_start(&self) -> u64 {
        match self.kind {
            ScheduleKind::Dyadic => 0,
            ScheduleKind::Integer => 1,
        }
    }

    /// `μ(m)`: `2^m` or `m`.
    pub fn multiplier(&self, m: u64) -> Result<f64> {
        match self.kind {
            ScheduleKind::Dyadic => {
                let cap = if self.s > 0 { DYADIC_GROWTH_CAP } else { DYADIC_SHRINK_CAP };
                if m > cap {
                    return Err(Error::ScaleOverflow { m });
                }
                Ok((m as f64).exp2())
            }
            ScheduleKind::Integer => {
                if m > INTEGER_CAP {
                    return Err(Error::ScaleOverflow { m });
                }
                if m == 0 {
                    return Err(Error::InvalidSchedule("integer schedule starts at m = 1".into()));
                }
                Ok(m as f64)
            }
        }
    }
}

/// Upper bound on `‖h_m(a) − lim h(a)‖` implied by the growth budget:
/// `eps/μ(m)` when bounded, `μ(m)^{s(p−1)} · 2eps/|2−2^p| · ‖a‖^p` otherwise.
pub fn residual_bound(growth: Growth, sched: &Schedule, m: u64, a_norm: f64) -> Result<f64> {
    let mu = sched.multiplier(m)?;
    if growth.sign()? != sched.s {
        return Err(Error::ScheduleMismatch);
    }
    Ok(match growth {
        Growth::Bounded { eps } => eps / mu,
        Growth::Power { eps, p } => {
            let s = f64::from(sched.s);
            mu.powf(s * (p - 1.0)) * eps * rassias_constant(p)? * a_norm.powf(p)
        }
    })
}

/// The `m`-th iterate at raw coordinates `x`.
pub fn iterate_at<M: Mapping + ?Sized>(f: &M, x: &[f64], sched: &Schedule, m: u64) -> Result<Vec<f64>> {
    let mu = sched.multiplier(m)?;
    let (arg_scale, out_scale) = if sched.s > 0 { (mu, 1.0 / mu) } else { (1.0 / mu, mu) };
    let arg: Vec<f64> = x.iter().map(|c| c * arg_scale).collect();
    let mut y = f.apply(&arg);
    for c in &mut y {
        *c *= out_scale;
        if !c.is_finite() {
            return Err(Error::NonFinite { m });
        }
    }
    Ok(y)
}

/// The map `a ↦ h_m(a)` for a fixed `m`.
pub struct IterateMap<'a, M: Mapping + ?Sized> {
    f: &'a M,
    sched: Schedule,
    m: u64,
}

impl<'a, M: Mapping + ?Sized> IterateMap<'a, M> {
    pub fn new(f: &'a M, sched: &Schedule, m: u64) -> Result<Self> {
        sched.validate()?;
        sched.multiplier(m)?;
        Ok(IterateMap { f, sched: sched.clone(), m })
    }
}

impl<M: Mapping + ?Sized> Mapping for IterateMap<'_, M> {
    fn domain(&self) -> &Algebra {
        self.f.domain()
    }

    fn codomain(&self) -> &Target {
        self.f.codomain()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        iterate_at(self.f, x, &self.sched, self.m).expect("multiplier checked at construction")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Iterate {
    pub m: u64,
    pub value: Vec<f64>,
    /// `‖h_{m+1} − h_m‖`; absent for the last iterate.
    pub step_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthWitness {
    pub m: u64,
    pub norm: f64,
    pub rule: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Converged { limit: Vec<f64>, residual_bound: f64, m: u64 },
    Diverged { growth_witness: GrowthWitness },
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationTrace {
    pub point: Element,
    pub schedule: Schedule,
    pub iterates: Vec<Iterate>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_bound: Option<f64>,
}

impl IterationTrace {
    fn finish(point: Element, schedule: Schedule, iterates: Vec<Iterate>, verdict: Verdict) -> Self {
        let (limit, residual_bound) = match &verdict {
            Verdict::Converged { limit, residual_bound, .. } => (Some(limit.clone()), Some(*residual_bound)),
            _ => (None, None),
        };
        IterationTrace { point, schedule, iterates, verdict, limit, residual_bound }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self.verdict, Verdict::Converged { .. })
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self.verdict, Verdict::Diverged { .. })
    }

    pub fn converged_limit(&self) -> Option<&[f64]> {
        self.limit.as_deref()
    }
}

fn dist(target: &Target, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    target.norm_coords(&d)
}

/// Runs the direct method at `a` until convergence, divergence or `m_max`.
///
/// Without a budget, convergence means three consecutive steps `≤ tol`.
/// With a budget, the run stops at the first `m` whose analytic residual is
/// `≤ tol`, provided the last three steps respect the envelope
/// `‖h_{j+1} − h_j‖ ≤ R(j) + R(j+1)`; an envelope violation voids the budget
/// and the empirical rule takes over.
pub fn direct_limit<M: Mapping + ?Sized>(f: &M, a: &Element, sched: &Schedule) -> Result<IterationTrace> {
    sched.validate()?;
    if a.space() != f.domain().id() {
        return Err(Error::DomainMismatch);
    }
    let codomain = f.codomain();
    let x = a.coords();
    let m0 = sched.m_start();

    if f.is_homogeneous() {
        let fa = f.apply(x);
        if fa.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { m: m0 });
        }
        let iterates = (0..3)
            .map(|k| Iterate { m: m0 + k, value: fa.clone(), step_norm: (k < 2).then_some(0.0) })
            .collect();
        let verdict = Verdict::Converged { limit: fa, residual_bound: 0.0, m: m0 };
        return Ok(IterationTrace::finish(a.clone(), sched.clone(), iterates, verdict));
    }

    let a_norm = f.domain().norm_coords(x);
    let residual = |m: u64| -> Result<Option<f64>> {
        match sched.budget {
            Some(g) => Ok(Some(residual_bound(g, sched, m, a_norm)?)),
            None => Ok(None),
        }
    };

    let first = iterate_at(f, x, sched, m0)?;
    let blowup = BLOWUP_FACTOR * (1.0 + codomain.norm_coords(&first));
    let mut iterates = vec![Iterate { m: m0, value: first, step_norm: None }];
    let mut steps: Vec<f64> = Vec::new();
    let mut budget_live = sched.budget.is_some();
    let mut m = m0;
    let verdict = loop {
        if m >= sched.m_max {
            break Verdict::Inconclusive;
        }
        let next_m = m + 1;
        let next = iterate_at(f, x, sched, next_m)?;
        let prev = iterates.last_mut().expect("nonempty");
        let step = dist(codomain, &prev.value, &next);
        prev.step_norm = Some(step);
        steps.push(step);
        let norm = codomain.norm_coords(&next);
        iterates.push(Iterate { m: next_m, value: next, step_norm: None });
        m = next_m;

        if norm > blowup {
            break Verdict::Diverged {
                growth_witness: GrowthWitness { m, norm, rule: "norm blow-up".into() },
            };
        }

        let n = steps.len();

        if budget_live && n >= 3 {
            let mut within = true;
            for j in n - 3..n {
                let mj = m0 + j as u64;
                let env = residual(mj)?.unwrap() + residual(mj + 1)?.unwrap();
                let hj = codomain.norm_coords(&iterates[j + 1].value);
                let slack = 4.0 * f64::EPSILON * (1.0 + hj) * 8.0;
                if steps[j] > env + slack {
                    within = false;
                }
            }
            if !within {
                budget_live = false;
            } else {
                let r = residual(m)?.unwrap();
                if r <= sched.tol {
                    let limit = iterates.last().unwrap().value.clone();
                    break Verdict::Converged { limit, residual_bound: r, m };
                }
                continue;
            }
        }

        if n >= 3 && steps[n - 3..].iter().all(|s| *s <= sched.tol) {
            let r = steps[n - 3..].iter().cloned().fold(0.0, f64::max);
            let limit = iterates.last().unwrap().value.clone();
            break Verdict::Converged { limit, residual_bound: r, m };
        }

        if n >= DIVERGENCE_WINDOW {
            let w = &steps[n - DIVERGENCE_WINDOW..];
            let its = &iterates[iterates.len() - DIVERGENCE_WINDOW..];
            let steps_grow = w.iter().all(|s| *s > sched.tol)
                && w.windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-6));
            let norms: Vec<f64> = its.iter().map(|it| codomain.norm_coords(&it.value)).collect();
            let norms_grow = norms.windows(2).all(|p| p[1] >= p[0]);
            if steps_grow && norms_grow {
                break Verdict::Diverged {
                    growth_witness: GrowthWitness { m, norm, rule: "monotone step growth".into() },
                };
            }
        }
    };
    Ok(IterationTrace::finish(a.clone(), sched.clone(), iterates, verdict))
}

/// Assembles the limit map from direct-method limits at `probes`, which must
/// form a basis of the domain, and extends it linearly.
///
/// The extension is checked against direct limits at 16 seeded random points
/// of the unit ball; a mismatch above `10·tol` is reported as `NotAdditive`.
pub fn build_limit_map(f: &MapSpec, sched: &Schedule, probes: &[Element]) -> Result<MapSpec> {
    sched.validate()?;
    let dom = f.domain_arc();
    let d = dom.dim();
    if probes.len() != d {
        return Err(Error::InvalidMap(format!("need {d} probe elements, got {}", probes.len())));
    }
    if probes.iter().any(|p| p.space() != dom.id()) {
        return Err(Error::DomainMismatch);
    }
    let traces: Vec<IterationTrace> = probes
        .par_iter()
        .map(|p| direct_limit(f, p, sched))
        .collect::<Result<_>>()?;
    let mut limits = Vec::with_capacity(d);
    for t in traces {
        match t.limit.clone() {
            Some(l) => limits.push(l),
            None => {
                return Err(Error::LimitDiverged { point: t.point.coords().to_vec(), trace: Box::new(t) })
            }
        }
    }
    let codim = f.codomain().dim();

    let standard = probes
        .iter()
        .enumerate()
        .all(|(i, p)| p.coords().iter().enumerate().all(|(j, c)| *c == if i == j { 1.0 } else { 0.0 }));
    let images: Vec<Vec<f64>> = if standard {
        limits
    } else {
        // columns of P are the probes; L P = Y  ⇒  L = Y P⁻¹
        let p = DMatrix::from_fn(d, d, |r, c| probes[c].coords()[r]);
        let inv = p
            .try_inverse()
            .ok_or_else(|| Error::InvalidMap("probe elements are linearly dependent".into()))?;
        let y = DMatrix::from_fn(codim, d, |r, c| limits[c][r]);
        let l = y * inv;
        (0..d).map(|c| l.column(c).iter().copied().collect()).collect()
    };
    let limit_map = MapSpec::from_basis_images(dom.clone(), f.codomain().clone(), &images)?
        .labeled(format!("limit of {}", f.label()));

    let mut rng = stream_rng(0, stream::LIMIT_CHECK);
    let points: Vec<Vec<f64>> = (0..LIMIT_CHECK_POINTS)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = dom.norm_coords(&v).max(f64::MIN_POSITIVE);
            let r: f64 = rng.random();
            v.into_iter().map(|c| c * r / n).collect()
        })
        .collect();
    let worst = points
        .par_iter()
        .map(|x| -> Result<f64> {
            let e = dom.element(x.clone())?;
            let t = direct_limit(f, &e, sched)?;
            Ok(match t.limit {
                Some(l) => dist(f.codomain(), &l, &limit_map.apply(x)),
                None => 0.0,
            })
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if worst > 10.0 * sched.tol {
        return Err(Error::NotAdditive(worst));
    }
    Ok(limit_map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;
    use std::sync::Arc;

    use crate::maps::{cauchy_defect_coords, make_perturbed_hom, Perturbation, DEFAULT_QUANTIZATION};

    fn reals() -> Arc<Algebra> {
        Arc::new(Algebra::reals())
    }

    fn scalar(c: f64, pert: Perturbation) -> MapSpec {
        let r = reals();
        MapSpec::linear(r.clone(), Target::Algebra(r), vec![c]).unwrap().with_perturbation(pert).unwrap()
    }

    fn luminet() -> MapSpec {
        MapSpec::zero(reals(), Target::Algebra(Arc::new(Algebra::matrix(3).unwrap())))
            .with_perturbation(Perturbation::LogMap { slot: 3 })
            .unwrap()
    }

    #[test]
    fn residual_bound_examples() {
        let s = Schedule::dyadic(60, 1e-9).unwrap();
        let r = residual_bound(Growth::Bounded { eps: 1.0 }, &s, 10, 1.0).unwrap();
        assert_eq!(r, 1.0 / 1024.0);

        let int = Schedule::new(ScheduleKind::Integer, 1, 100, 1e-9).unwrap();
        let r = residual_bound(Growth::Power { eps: 1.0, p: 0.5 }, &int, 4, 1.0).unwrap();
        let expected = 0.5 * 2.0 / (2.0 - 2f64.sqrt());
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 1.7071).abs() < 1e-4);

        assert!(matches!(
            residual_bound(Growth::Power { eps: 1.0, p: 1.0 }, &s, 4, 1.0),
            Err(Error::UnsupportedExponent(_))
        ));
        assert!(matches!(
            residual_bound(Growth::Power { eps: 1.0, p: 3.0 }, &s, 4, 1.0),
            Err(Error::ScheduleMismatch)
        ));
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::dyadic(0, 1e-9).is_err());
        assert!(Schedule::dyadic(10, 0.0).is_err());
        assert!(Schedule::new(ScheduleKind::Integer, 2, 10, 1e-3).is_err());
        let s = Schedule::new(ScheduleKind::Dyadic, -1, 10, 1e-3).unwrap();
        assert!(matches!(s.with_budget(Growth::Bounded { eps: 1.0 }), Err(Error::ScheduleMismatch)));
    }

    #[test]
    fn additive_map_is_a_fixed_point() {
        let f = scalar(3.0, Perturbation::None);
        let r = f.domain_arc().clone();
        let t = direct_limit(&f, &r.element(vec![5.0]).unwrap(), &Schedule::dyadic(60, 1e-12).unwrap()).unwrap();
        assert_eq!(t.converged_limit(), Some(&[15.0][..]));
        assert!(t.iterates.iter().all(|it| it.value == vec![15.0]));
        assert_eq!(t.iterates[0].m, 0);
    }

    #[test]
    fn sine_perturbation_converges_to_identity() {
        let f = scalar(1.0, Perturbation::SineBump { amplitude: 1.0 });
        let r = f.domain_arc().clone();
        let t = direct_limit(&f, &r.element(vec![1.0]).unwrap(), &Schedule::dyadic(60, 1e-12).unwrap()).unwrap();
        let l = t.converged_limit().unwrap()[0];
        assert!((l - 1.0).abs() < 1e-11);
        for it in &t.iterates {
            let closed = (it.m as f64).exp2().sin() / (it.m as f64).exp2();
            assert!((it.value[0] - 1.0 - closed).abs() < 1e-12);
            assert!((it.value[0] - 1.0).abs() <= (-(it.m as f64)).exp2() + 1e-15);
        }
    }

    #[test]
    fn luminet_iterates_grow_like_m_ln2() {
        let f = luminet();
        let r = f.domain_arc().clone();
        let t = direct_limit(&f, &r.element(vec![1.0]).unwrap(), &Schedule::dyadic(60, 1e-9).unwrap()).unwrap();
        assert!(t.is_diverged(), "{:?}", t.verdict);
        for it in &t.iterates {
            assert!((it.value[3] - it.m as f64 * LN_2).abs() < 1e-9);
        }
        let e = build_limit_map(&f, &Schedule::dyadic(60, 1e-9).unwrap(), &r.basis_elements());
        assert!(matches!(e, Err(Error::LimitDiverged { .. })));
    }

    #[test]
    fn growth_cap_raises_scale_overflow() {
        // h_m(0) = 2^-m never settles below the tolerance
        let f = scalar(1.0, Perturbation::CustomPolynomial {
            terms: vec![crate::maps::PolyTerm { output: 0, input: 0, power: 0, coefficient: 1.0 }],
        });
        let r = f.domain_arc().clone();
        let s = Schedule::dyadic(100, 1e-300).unwrap();
        assert!(matches!(
            direct_limit(&f, &r.zero(), &s),
            Err(Error::ScaleOverflow { m: 61 })
        ));
    }

    #[test]
    fn non_finite_values_are_reported() {
        let r = reals();
        let g = scalar(1.0, Perturbation::CustomPolynomial {
            terms: vec![crate::maps::PolyTerm { output: 0, input: 0, power: 40, coefficient: 1.0 }],
        });
        let e = direct_limit(&g, &r.element(vec![1e10]).unwrap(), &Schedule::dyadic(60, 1e-12).unwrap());
        assert!(matches!(e, Err(Error::NonFinite { m: 0 })));
    }

    #[test]
    fn homogeneous_maps_short_circuit() {
        let f = scalar(-2.0, Perturbation::None).homogeneous().unwrap();
        let r = f.domain_arc().clone();
        let t = direct_limit(&f, &r.element(vec![0.3]).unwrap(), &Schedule::dyadic(60, 1e-12).unwrap()).unwrap();
        assert!(t.iterates.iter().all(|it| it.value == vec![-0.6]));
        assert_eq!(t.converged_limit(), Some(&[-0.6][..]));
    }

    #[test]
    fn exact_linear_limit_map_reproduces_base() {
        let m2 = Arc::new(Algebra::matrix(2).unwrap());
        let base: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = MapSpec::linear(m2.clone(), Target::Algebra(m2.clone()), base.clone()).unwrap();
        let h = build_limit_map(&f, &Schedule::dyadic(60, 1e-12).unwrap(), &m2.basis_elements()).unwrap();
        for (a, b) in h.base_linear().iter().zip(&base) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn limit_map_with_nonstandard_probes() {
        let m2 = Arc::new(Algebra::matrix(2).unwrap());
        let f = make_perturbed_hom(&MapSpec::identity(m2.clone()), 2, 0.5, DEFAULT_QUANTIZATION, 4).unwrap();
        let sched = Schedule::dyadic(60, 1e-12).unwrap().with_budget(Growth::Bounded { eps: 0.5 }).unwrap();
        let probes: Vec<Element> = [[1.0, 1.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 2.0, 0.0], [1.0, 0.0, 0.0, 1.0]]
            .iter()
            .map(|c| m2.element(c.to_vec()).unwrap())
            .collect();
        let h = build_limit_map(&f, &sched, &probes).unwrap();
        for (i, v) in h.base_linear().iter().enumerate() {
            let id = if i % 5 == 0 { 1.0 } else { 0.0 };
            assert!((v - id).abs() < 1e-10);
        }
    }

    #[test]
    fn bounded_budget_stops_where_the_residual_reaches_tol() {
        let f = make_perturbed_hom(&MapSpec::identity(reals()), 2, 0.5, DEFAULT_QUANTIZATION, 1).unwrap();
        let tol = 0.5 * (-40f64).exp2();
        let sched = Schedule::dyadic(60, tol).unwrap().with_budget(Growth::Bounded { eps: 0.5 }).unwrap();
        let r = reals();
        let t = direct_limit(&f, &r.element(vec![1.0]).unwrap(), &sched).unwrap();
        match t.verdict {
            Verdict::Converged { m, residual_bound, .. } => {
                assert_eq!(m, 40);
                assert!(residual_bound <= tol);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn wrong_budget_falls_back_to_empirical_rule() {
        let f = scalar(1.0, Perturbation::SineBump { amplitude: 1.0 });
        let sched = Schedule::dyadic(60, 1e-9).unwrap().with_budget(Growth::Bounded { eps: 1e-6 }).unwrap();
        let r = reals();
        let t = direct_limit(&f, &r.element(vec![1.0]).unwrap(), &sched).unwrap();
        assert!(t.is_converged());
        let n = t.iterates.len();
        assert!(t.iterates[n - 4..n - 1].iter().all(|it| it.step_norm.unwrap() <= 1e-9));
    }

    #[test]
    fn iterate_cauchy_defect_shrinks() {
        let f = make_perturbed_hom(&MapSpec::identity(reals()), 2, 0.5, DEFAULT_QUANTIZATION, 2).unwrap();
        let sched = Schedule::dyadic(60, 1e-12).unwrap();
        for m in 1..=20 {
            let hm = IterateMap::new(&f, &sched, m).unwrap();
            for i in 0..50 {
                let a = (i as f64 * 0.77).sin() * 3.0;
                let b = (i as f64 * 1.91).cos() * 3.0;
                let d = cauchy_defect_coords(&hm, &[a], &[b]);
                assert!(d <= 1.5 * (-(m as f64)).exp2() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn stable_under_longer_runs() {
        let f = scalar(1.0, Perturbation::SineBump { amplitude: 0.3 });
        let r = reals();
        let a = r.element(vec![0.7]).unwrap();
        let t1 = direct_limit(&f, &a, &Schedule::dyadic(50, 1e-10).unwrap()).unwrap();
        let t2 = direct_limit(&f, &a, &Schedule::dyadic(60, 1e-10).unwrap()).unwrap();
        let (l1, l2) = (t1.converged_limit().unwrap()[0], t2.converged_limit().unwrap()[0]);
        assert!((l1 - l2).abs() <= 1e-10);
    }

    #[test]
    fn trace_serializes_with_status() {
        let f = scalar(3.0, Perturbation::None);
        let r = f.domain_arc().clone();
        let t = direct_limit(&f, &r.element(vec![5.0]).unwrap(), &Schedule::dyadic(10, 1e-12).unwrap()).unwrap();
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["verdict"]["status"], "converged");
        assert_eq!(v["limit"][0], 15.0);
        assert!(v["iterates"].as_array().unwrap().len() >= 3);
    }
}
