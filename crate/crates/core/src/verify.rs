//! Grid-supremum checks of the stability bounds and identities.
//!
//! Every check evaluates a defect over a finite [`Grid`] (points, pairs of
//! points, or seeded tuples of points) and reports the largest value seen,
//! the argument that produced it, and whether it stays under the bound.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{Algebra, Element, SpaceId};
use crate::direct::rassias_constant;
use crate::error::{Error, Result};
use crate::maps::{cauchy_defect_coords, der_defect_coords, hom_defect_coords, MapSpec, Mapping};
use crate::rng::{stream, stream_rng};

/// Tolerance of exact algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance of comparisons against a computed limit map.
pub const LIMIT_TOL: f64 = 1e-9;
/// Weights below this are treated as zero and their samples skipped.
pub const WEIGHT_FLOOR: f64 = 1e-12;

const LATTICE_HALF: i32 = 10;
const TENSOR_LIMIT: usize = 10_000;
const RANDOM_POINTS: usize = 256;
const MAX_PAIRS: usize = 65_536;
const DEFAULT_TUPLES: usize = 512;

#[derive(Clone, Debug, Serialize)]
pub struct Grid {
    points: Vec<Element>,
    description: String,
    seed: u64,
    #[serde(skip)]
    space: SpaceId,
}

impl Grid {
    pub fn new(points: Vec<Element>, description: impl Into<String>, seed: u64) -> Result<Self> {
        let space = points.first().ok_or_else(|| Error::Config("grid must be nonempty".into()))?.space();
        if points.iter().any(|p| p.space() != space) {
            return Err(Error::AlgebraMismatch);
        }
        Ok(Grid { points, description: description.into(), seed, space })
    }

    /// Lattice `{−10,…,10}` scaled into the ball of `radius` plus 256 seeded
    /// random points of that ball.
    ///
    /// The lattice is the full tensor product when it has at most `10^4`
    /// points and the union of the coordinate axes otherwise.
    pub fn standard(alg: &Algebra, radius: f64, seed: u64) -> Self {
        Grid::lattice_and_ball(alg, radius, RANDOM_POINTS, seed)
    }

    pub fn lattice_and_ball(alg: &Algebra, radius: f64, random: usize, seed: u64) -> Self {
        let mut points = lattice(alg, radius);
        points.extend(random_ball(alg, radius, random, seed));
        let kind = if tensor_size(alg.dim()).is_some() { "tensor" } else { "axis" };
        Grid::new(points, format!("{kind} lattice and {random} random points, radius {radius}"), seed)
            .expect("lattice is nonempty")
    }

    /// Points `t·g` for integers `t ∈ [−n, n]`.
    pub fn integer_line(generator: &Element, n: u32, seed: u64) -> Self {
        let points = (-(n as i64)..=n as i64).map(|t| generator.scale(t as f64)).collect();
        Grid::new(points, format!("integer multiples of a generator, |t| ≤ {n}"), seed).expect("nonempty")
    }

    pub fn points(&self) -> &[Element] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    /// Appends the points of `other`, which must live in the same space.
    pub fn extend(&mut self, other: &Grid) -> Result<()> {
        if other.space != self.space {
            return Err(Error::AlgebraMismatch);
        }
        self.points.extend(other.points.iter().cloned());
        self.description = format!("{} + {}", self.description, other.description);
        Ok(())
    }

    /// Every unordered pair `i ≤ j` when there are at most 65 536 of them,
    /// otherwise that many seeded random pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.points.len();
        if n * (n + 1) / 2 <= MAX_PAIRS {
            (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
        } else {
            let mut rng = stream_rng(self.seed, stream::PAIRS);
            (0..MAX_PAIRS).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect()
        }
    }

    /// `count` seeded random `n`-tuples of point indices.
    pub fn tuples(&self, n: usize, count: usize) -> Vec<Vec<usize>> {
        let len = self.points.len();
        let mut rng = stream_rng(self.seed, stream::TUPLES);
        (0..count).map(|_| (0..n).map(|_| rng.random_range(0..len)).collect()).collect()
    }
}

fn tensor_size(dim: usize) -> Option<usize> {
    let side = (2 * LATTICE_HALF + 1) as usize;
    side.checked_pow(dim as u32).filter(|s| *s <= TENSOR_LIMIT)
}

fn lattice(alg: &Algebra, radius: f64) -> Vec<Element> {
    let d = alg.dim();
    let side = (2 * LATTICE_HALF + 1) as usize;
    match tensor_size(d) {
        Some(total) => {
            // the all-ones corner has the largest norm for the supported norms
            let scale = radius / (LATTICE_HALF as f64 * alg.norm_coords(&vec![1.0; d]));
            (0..total)
                .map(|mut idx| {
                    let mut c = vec![0.0; d];
                    for slot in c.iter_mut() {
                        *slot = ((idx % side) as i32 - LATTICE_HALF) as f64 * scale;
                        idx /= side;
                    }
                    alg.element(c).expect("finite lattice point")
                })
                .collect()
        }
        None => {
            let mut out = vec![alg.zero()];
            for i in 0..d {
                let e = alg.basis(i);
                let scale = radius / (LATTICE_HALF as f64 * alg.norm(&e));
                for t in (-LATTICE_HALF..=LATTICE_HALF).filter(|t| *t != 0) {
                    out.push(e.scale(t as f64 * scale));
                }
            }
            out
        }
    }
}

fn random_ball(alg: &Algebra, radius: f64, count: usize, seed: u64) -> Vec<Element> {
    let d = alg.dim();
    let mut rng = stream_rng(seed, stream::GRID);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = alg.norm_coords(&v).max(f64::MIN_POSITIVE);
            let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
            alg.element(v.into_iter().map(|c| c * r / n).collect()).expect("finite sample")
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    pub functional: String,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub sup_value: f64,
    /// Coordinates of the arguments attaining `sup_value`.
    pub witness: Vec<Vec<f64>>,
    pub bound: Option<f64>,
    pub tolerance: f64,
    pub satisfied: bool,
    pub samples: usize,
}

impl DefectReport {
    pub fn new(functional: impl Into<String>, sup: Sup, bound: Option<f64>, tolerance: f64) -> Self {
        let mut r = DefectReport {
            functional: functional.into(),
            n: None,
            p: None,
            q: None,
            eps: None,
            delta: None,
            sup_value: sup.value,
            witness: sup.witness,
            bound,
            tolerance,
            satisfied: true,
            samples: sup.samples,
        };
        r.reassess();
        r
    }

    fn reassess(&mut self) {
        self.satisfied = match self.bound {
            Some(b) => self.sup_value <= b + self.tolerance,
            None => self.sup_value.is_finite(),
        };
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.reassess();
        self
    }

    /// Tolerance `rel · bound`.
    pub fn with_relative_tolerance(self, rel: f64) -> Self {
        let t = rel * self.bound.unwrap_or(0.0).abs();
        self.with_tolerance(t)
    }

    fn params(mut self, n: Option<usize>, p: Option<f64>, q: Option<f64>, eps: Option<f64>, delta: Option<f64>) -> Self {
        self.n = n;
        self.p = p;
        self.q = q;
        self.eps = eps;
        self.delta = delta;
        self
    }
}

/// Largest value of a sampled functional and its witness.
#[derive(Clone, Debug, PartialEq)]
pub struct Sup {
    pub value: f64,
    pub witness: Vec<Vec<f64>>,
    pub samples: usize,
}

/// Parallel evaluation, then an ordered reduction: the first index attaining
/// the maximum wins. `None` values are skipped samples.
pub fn sup_over<T, F>(items: &[T], eval: F) -> Sup
where
    T: Sync,
    F: Fn(&T) -> Option<(f64, Vec<Vec<f64>>)> + Sync,
{
    let values: Vec<Option<(f64, Vec<Vec<f64>>)>> = items.par_iter().map(&eval).collect();
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut samples = 0;
    for (v, w) in values.into_iter().flatten() {
        samples += 1;
        let better = match &best {
            None => true,
            Some((b, _)) => v > *b || (v.is_nan() && !b.is_nan()),
        };
        if better {
            best = Some((v, w));
        }
    }
    let (value, witness) = best.unwrap_or((0.0, Vec::new()));
    Sup { value, witness, samples }
}

fn diff_norm<M: Mapping + ?Sized>(f: &M, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    f.codomain().norm_coords(&d)
}

fn check_space<M: Mapping + ?Sized>(f: &M, grid: &Grid) -> Result<()> {
    if f.domain().id() != grid.space() {
        return Err(Error::DomainMismatch);
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 0.0) || p == 1.0 {
        return Err(Error::UnsupportedExponent(p));
    }
    Ok(())
}

/// Both exponents strictly below 1 or both strictly above.
fn check_exponent_pair(p: f64, q: f64) -> Result<()> {
    check_exponent(p)?;
    if !q.is_finite() || q < 0.0 || q == 1.0 || ((p < 1.0) != (q < 1.0)) {
        return Err(Error::UnsupportedExponent(q));
    }
    Ok(())
}

/// Fails with `NotAdditive` when `h` has a Cauchy defect above
/// `1e-9 (1 + ‖h(a)‖ + ‖h(b)‖)` at some grid pair.
pub fn require_additive<M: Mapping + ?Sized>(h: &M, grid: &Grid) -> Result<()> {
    check_space(h, grid)?;
    let pts = grid.points();
    let pairs = grid.pairs();
    let worst = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (pts[i].coords(), pts[j].coords());
            let scale = 1.0 + h.codomain().norm_coords(&h.apply(a)) + h.codomain().norm_coords(&h.apply(b));
            cauchy_defect_coords(h, a, b) / scale
        })
        .reduce(|| 0.0, f64::max);
    if worst > LIMIT_TOL {
        return Err(Error::NotAdditive(worst));
    }
    Ok(())
}

/// `sup ‖f(a) − h(a)‖` against `eps`.
pub fn check_hyers_bound(f: &MapSpec, h: &MapSpec, eps: f64, grid: &Grid) -> Result<DefectReport> {
    check_space(f, grid)?;
    require_additive(h, grid)?;
    let sup = sup_over(grid.points(), |a| {
        let x = a.coords();
        Some((diff_norm(f, &f.apply(x), &h.apply(x)), vec![x.to_vec()]))
    });
    Ok(DefectReport::new("hyers_distance", sup, Some(eps), LIMIT_TOL).params(None, None, None, Some(eps), None))
}

/// `sup ‖f(a) − D(a)‖ / ‖a‖^p` against `2 eps / |2 − 2^p|`.
pub fn check_rassias_bound(f: &MapSpec, d: &MapSpec, eps: f64, p: f64, grid: &Grid) -> Result<DefectReport> {
    check_exponent(p)?;
    check_space(f, grid)?;
    require_additive(d, grid)?;
    let dom = f.domain();
    let sup = sup_over(grid.points(), |a| {
        let x = a.coords();
        let w = dom.norm_coords(x).powf(p);
        (w >= WEIGHT_FLOOR).then(|| (diff_norm(f, &f.apply(x), &d.apply(x)) / w, vec![x.to_vec()]))
    });
    let bound = eps * rassias_constant(p)?;
    Ok(DefectReport::new("rassias_ratio", sup, Some(bound), LIMIT_TOL).params(None, Some(p), None, Some(eps), None))
}

/// `sup ‖f(a+b) − f(a) − f(b)‖ / (‖a‖^p + ‖b‖^p)` over grid pairs, with no
/// restriction on `p`.
pub fn cauchy_ratio<M: Mapping + ?Sized>(f: &M, p: f64, eps: Option<f64>, grid: &Grid) -> Result<DefectReport> {
    check_space(f, grid)?;
    let pts = grid.points();
    let dom = f.domain();
    let sup = sup_over(&grid.pairs(), |&(i, j)| {
        let (a, b) = (pts[i].coords(), pts[j].coords());
        let w = dom.norm_coords(a).powf(p) + dom.norm_coords(b).powf(p);
        (w >= WEIGHT_FLOOR).then(|| (cauchy_defect_coords(f, a, b) / w, vec![a.to_vec(), b.to_vec()]))
    });
    Ok(DefectReport::new("cauchy_ratio", sup, eps, IDENTITY_TOL).params(None, Some(p), None, eps, None))
}

fn tuple_coords<'a>(pts: &'a [Element], idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| pts[i].coords()).collect()
}

/// `sup ‖f(a_1⋯a_n) − f(a_1)⋯f(a_n)‖ / Π‖a_i‖^q` over seeded grid tuples.
pub fn hom_ratio<M: Mapping + ?Sized>(f: &M, q: f64, n: usize, delta: Option<f64>, grid: &Grid) -> Result<DefectReport> {
    if n < 2 {
        return Err(Error::InvalidArity(n));
    }
    check_space(f, grid)?;
    if f.codomain().as_algebra().is_none() {
        return Err(Error::CodomainNotAlgebra);
    }
    let pts = grid.points();
    let dom = f.domain();
    let sup = sup_over(&grid.tuples(n, DEFAULT_TUPLES), |idx| {
        let t = tuple_coords(pts, idx);
        let w: f64 = t.iter().map(|a| dom.norm_coords(a).powf(q)).product();
        if w < WEIGHT_FLOOR {
            return None;
        }
        let d = hom_defect_coords(f, &t).expect("codomain checked");
        Some((d / w, t.iter().map(|a| a.to_vec()).collect()))
    });
    Ok(DefectReport::new("hom_ratio", sup, delta, IDENTITY_TOL).params(Some(n), None, Some(q), None, delta))
}

/// Weight on the right-hand side of the Leibniz hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeibnizWeight {
    /// `Σ ‖a_i‖^p`, with the Cauchy exponent.
    SumOfPowers,
    /// `Π ‖a_i‖^q`.
    ProductOfPowers { q: f64 },
}

/// `sup ‖f(a_1⋯a_n) − Σ_j (a_1⋯a_{j-1}) f(a_j) (a_{j+1}⋯a_n)‖ / weight` over
/// seeded grid tuples, with no restriction on the exponents.
pub fn der_ratio<M: Mapping + ?Sized>(f: &M, p: f64, n: usize, weight: LeibnizWeight, eps: Option<f64>, grid: &Grid) -> Result<DefectReport> {
    if n < 2 {
        return Err(Error::InvalidArity(n));
    }
    check_space(f, grid)?;
    let pts = grid.points();
    let dom = f.domain();
    let tuples = grid.tuples(n, DEFAULT_TUPLES);
    // surfaces CodomainNotModule before the parallel section
    der_defect_coords(f, &tuple_coords(pts, &tuples[0]))?;
    let sup = sup_over(&tuples, |idx| {
        let t = tuple_coords(pts, idx);
        let w = match weight {
            LeibnizWeight::SumOfPowers => t.iter().map(|a| dom.norm_coords(a).powf(p)).sum::<f64>(),
            LeibnizWeight::ProductOfPowers { q } => t.iter().map(|a| dom.norm_coords(a).powf(q)).product(),
        };
        if w < WEIGHT_FLOOR {
            return None;
        }
        let d = der_defect_coords(f, &t).expect("codomain checked");
        Some((d / w, t.iter().map(|a| a.to_vec()).collect()))
    });
    let q = match weight {
        LeibnizWeight::SumOfPowers => None,
        LeibnizWeight::ProductOfPowers { q } => Some(q),
    };
    Ok(DefectReport::new("der_ratio", sup, eps, IDENTITY_TOL).params(Some(n), Some(p), q, eps, None))
}

/// Cauchy and product hypotheses of the Rassias-type homomorphism result:
/// `‖f(a+b)−f(a)−f(b)‖ ≤ eps(‖a‖^p+‖b‖^p)` and
/// `‖f(a_1⋯a_n) − f(a_1)⋯f(a_n)‖ ≤ delta Π‖a_i‖^q`.
pub fn check_hom_hypotheses(
    f: &MapSpec,
    eps: f64,
    delta: f64,
    p: f64,
    q: f64,
    n: usize,
    grid: &Grid,
) -> Result<(DefectReport, DefectReport)> {
    check_exponent_pair(p, q)?;
    if n < 2 {
        return Err(Error::InvalidArity(n));
    }
    let c = cauchy_ratio(f, p, Some(eps), grid)?.params(Some(n), Some(p), Some(q), Some(eps), Some(delta));
    let h = hom_ratio(f, q, n, Some(delta), grid)?.params(Some(n), Some(p), Some(q), Some(eps), Some(delta));
    Ok((c, h))
}

/// Cauchy and Leibniz hypotheses of the derivation results, with the
/// Leibniz defect weighted by `weight`.
pub fn check_der_hypotheses(
    f: &MapSpec,
    eps: f64,
    p: f64,
    n: usize,
    weight: LeibnizWeight,
    grid: &Grid,
) -> Result<(DefectReport, DefectReport)> {
    match weight {
        LeibnizWeight::SumOfPowers => check_exponent(p)?,
        LeibnizWeight::ProductOfPowers { q } => check_exponent_pair(p, q)?,
    }
    if n < 2 {
        return Err(Error::InvalidArity(n));
    }
    let c = cauchy_ratio(f, p, Some(eps), grid)?.params(Some(n), Some(p), None, Some(eps), None);
    let d = der_ratio(f, p, n, weight, Some(eps), grid)?;
    Ok((c, d))
}

/// Products `Π_{i∈range} g_i` with `g_i = h(a_i)` or `f(a_i)`.
fn partial_product(alg: &Algebra, vals: &[Vec<f64>]) -> Vec<f64> {
    alg.chain_coords(vals.iter().map(|v| v.as_slice())).expect("nonempty range")
}

/// Both orthogonality products
/// `(Π_{i≤k} h(a_i))(Π_{i>k} f(a_i) − Π_{i>k} h(a_i))` and
/// `(Π_{i≤k} f(a_i) − Π_{i≤k} h(a_i))(Π_{i>k} h(a_i))`, maximized over
/// tuples and `k ∈ k_range`.
pub fn orthogonality_check(
    f: &MapSpec,
    h: &MapSpec,
    tuples: &[Vec<Element>],
    k_range: std::ops::RangeInclusive<usize>,
) -> Result<DefectReport> {
    let (alg, n) = product_setup(f, h, tuples, &k_range)?;
    let sup = sup_over(tuples, |t| {
        let fv: Vec<Vec<f64>> = t.iter().map(|a| f.apply(a.coords())).collect();
        let hv: Vec<Vec<f64>> = t.iter().map(|a| h.apply(a.coords())).collect();
        let mut worst = 0.0f64;
        for k in k_range.clone() {
            let h_head = partial_product(alg, &hv[..k]);
            let h_tail = partial_product(alg, &hv[k..]);
            let f_head = partial_product(alg, &fv[..k]);
            let f_tail = partial_product(alg, &fv[k..]);
            let tail_gap: Vec<f64> = f_tail.iter().zip(&h_tail).map(|(x, y)| x - y).collect();
            let head_gap: Vec<f64> = f_head.iter().zip(&h_head).map(|(x, y)| x - y).collect();
            worst = worst
                .max(alg.norm_coords(&alg.mul_coords(&h_head, &tail_gap)))
                .max(alg.norm_coords(&alg.mul_coords(&head_gap, &h_tail)));
        }
        Some((worst, t.iter().map(|a| a.coords().to_vec()).collect()))
    });
    Ok(DefectReport::new("orthogonality", sup, Some(0.0), 1e-6).params(Some(n), None, None, None, None))
}

/// Mixed-product identities `(Π_{i≤k} h(a_i))(Π_{i>k} f(a_i)) = h(a_1⋯a_n)`
/// and `(Π_{i≤k} f(a_i))(Π_{i>k} h(a_i)) = h(a_1⋯a_n) = Π h(a_i)`.
pub fn mixed_product_check(
    f: &MapSpec,
    h: &MapSpec,
    tuples: &[Vec<Element>],
    k_range: std::ops::RangeInclusive<usize>,
) -> Result<DefectReport> {
    let (alg, n) = product_setup(f, h, tuples, &k_range)?;
    let dom = f.domain();
    let sup = sup_over(tuples, |t| {
        let fv: Vec<Vec<f64>> = t.iter().map(|a| f.apply(a.coords())).collect();
        let hv: Vec<Vec<f64>> = t.iter().map(|a| h.apply(a.coords())).collect();
        let prod = dom.chain_coords(t.iter().map(|a| a.coords())).expect("nonempty");
        let target = h.apply(&prod);
        let all_h = partial_product(alg, &hv);
        let gap = |v: &[f64]| diff_norm(h, v, &target);
        let mut worst = gap(&all_h);
        for k in k_range.clone() {
            let hf = alg.mul_coords(&partial_product(alg, &hv[..k]), &partial_product(alg, &fv[k..]));
            let fh = alg.mul_coords(&partial_product(alg, &fv[..k]), &partial_product(alg, &hv[k..]));
            worst = worst.max(gap(&hf)).max(gap(&fh));
        }
        Some((worst, t.iter().map(|a| a.coords().to_vec()).collect()))
    });
    Ok(DefectReport::new("mixed_products", sup, Some(0.0), 1e-6).params(Some(n), None, None, None, None))
}

fn product_setup<'a>(
    f: &'a MapSpec,
    h: &MapSpec,
    tuples: &[Vec<Element>],
    k_range: &std::ops::RangeInclusive<usize>,
) -> Result<(&'a Algebra, usize)> {
    let alg = f.codomain().as_algebra().ok_or(Error::CodomainNotAlgebra)?;
    if h.codomain().id() != f.codomain().id() || h.domain().id() != f.domain().id() {
        return Err(Error::AlgebraMismatch);
    }
    let n = tuples.first().map(|t| t.len()).ok_or(Error::EmptyChain)?;
    if n < 2 {
        return Err(Error::InvalidArity(n));
    }
    if tuples.iter().any(|t| t.len() != n) {
        return Err(Error::InvalidArity(n));
    }
    if tuples.iter().flatten().any(|a| a.space() != f.domain().id()) {
        return Err(Error::DomainMismatch);
    }
    if *k_range.start() < 1 || *k_range.end() > n - 1 || k_range.is_empty() {
        return Err(Error::InvalidArity(n));
    }
    Ok((alg, n))
}

/// `sup ‖f(a) − D(a)‖` for a map declared homogeneous; exact equality
/// is expected.
pub fn homogeneity_implies_equality(f: &MapSpec, d: &MapSpec, grid: &Grid) -> Result<DefectReport> {
    if !f.is_homogeneous() {
        return Err(Error::NotHomogeneous);
    }
    check_space(f, grid)?;
    require_additive(f, grid)?;
    let sup = sup_over(grid.points(), |a| {
        let x = a.coords();
        Some((diff_norm(f, &f.apply(x), &d.apply(x)), vec![x.to_vec()]))
    });
    Ok(DefectReport::new("homogeneous_equality", sup, Some(0.0), IDENTITY_TOL))
}

/// Materializes index tuples as element tuples.
pub fn tuples_of(grid: &Grid, n: usize, count: usize) -> Vec<Vec<Element>> {
    grid.tuples(n, count)
        .into_iter()
        .map(|idx| idx.into_iter().map(|i| grid.points()[i].clone()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use proptest::prelude::*;

    use crate::direct::{build_limit_map, Growth, Schedule};
    use crate::maps::{make_perturbed_hom, make_power_perturbed_hom, Perturbation, PolyTerm, Target, DEFAULT_QUANTIZATION};

    fn reals() -> Arc<Algebra> {
        Arc::new(Algebra::reals())
    }

    fn m2() -> Arc<Algebra> {
        Arc::new(Algebra::matrix(2).unwrap())
    }

    fn constant(c: f64) -> Perturbation {
        Perturbation::CustomPolynomial { terms: vec![PolyTerm { output: 0, input: 0, power: 0, coefficient: c }] }
    }

    #[test]
    fn standard_grid_shapes() {
        let r = Algebra::reals();
        let g = Grid::standard(&r, 1.0, 3);
        assert_eq!(g.len(), 21 + 256);
        assert!(g.points().iter().all(|p| r.norm(p) <= 1.0 + 1e-15));
        let m = Algebra::matrix(2).unwrap();
        let g = Grid::standard(&m, 1.0, 3);
        assert_eq!(g.len(), 1 + 4 * 20 + 256);
        assert!(g.points().iter().all(|p| m.norm(p) <= 1.0 + 1e-12));
        let g2 = Grid::standard(&m, 1.0, 3);
        assert_eq!(g.points(), g2.points());
    }

    #[test]
    fn hyers_examples() {
        let r = reals();
        let grid = Grid::standard(&r, 10.0, 1);
        let h = MapSpec::identity(r.clone());
        assert_eq!(check_hyers_bound(&h, &h, 0.0, &grid).unwrap().sup_value, 0.0);

        let f = make_perturbed_hom(&h, 2, 0.5, DEFAULT_QUANTIZATION, 5).unwrap();
        let rep = check_hyers_bound(&f, &h, 0.5, &grid).unwrap();
        assert!(rep.satisfied && rep.sup_value <= 0.5 && rep.sup_value > 0.0);

        let off = h.clone().with_perturbation(constant(2.0)).unwrap();
        let rep = check_hyers_bound(&off, &h, 1.0, &grid).unwrap();
        assert!(!rep.satisfied);
        assert!((rep.sup_value - 2.0).abs() < 1e-12);

        assert!(matches!(check_hyers_bound(&h, &off, 1.0, &grid), Err(Error::NotAdditive(_))));
    }

    #[test]
    fn rassias_examples() {
        let r = reals();
        let grid = Grid::standard(&r, 1.0, 2);
        let d = MapSpec::identity(r.clone());
        let rep = check_rassias_bound(&d, &d, 1.0, 0.5, &grid).unwrap();
        assert_eq!(rep.sup_value, 0.0);

        let f = make_perturbed_hom(&d, 2, 1.0, DEFAULT_QUANTIZATION, 5).unwrap();
        let rep = check_rassias_bound(&f, &d, 1.0, 0.0, &grid).unwrap();
        assert_eq!(rep.bound, Some(2.0));
        assert!(rep.satisfied);

        let g = make_power_perturbed_hom(&d, 2, 1.0, 0.5, DEFAULT_QUANTIZATION, 5).unwrap();
        let rep = check_rassias_bound(&g, &d, 1.0, 0.5, &grid).unwrap();
        assert!((rep.bound.unwrap() - 2.0 / (2.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!(rep.satisfied && rep.sup_value <= 1.0);

        assert!(matches!(check_rassias_bound(&g, &d, 1.0, 1.0, &grid), Err(Error::UnsupportedExponent(_))));
        assert_eq!(check_rassias_bound(&g, &d, 3.0, 3.0, &grid).unwrap().bound, Some(1.0));
    }

    #[test]
    fn hom_hypotheses_examples() {
        let r = reals();
        let grid = Grid::standard(&r, 2.0, 4);
        let id = MapSpec::identity(r.clone());
        let (c, h) = check_hom_hypotheses(&id, 0.0, 0.0, 0.5, 0.5, 3, &grid).unwrap();
        assert_eq!((c.sup_value, h.sup_value), (0.0, 0.0));
        assert!(c.satisfied && h.satisfied);

        let eps = 0.2;
        let f = id
            .clone()
            .with_perturbation(Perturbation::PowerNoise {
                eps,
                p: 0.5,
                quantization_step: DEFAULT_QUANTIZATION,
                seed: 3,
                support: None,
            })
            .unwrap();
        let c = cauchy_ratio(&f, 0.5, Some(3.0 * eps), &grid).unwrap();
        assert!(c.satisfied, "{}", c.sup_value);

        assert!(matches!(
            check_hom_hypotheses(&id, 1.0, 1.0, 0.5, 2.0, 2, &grid),
            Err(Error::UnsupportedExponent(_))
        ));
        assert!(matches!(
            check_hom_hypotheses(&id, 1.0, 1.0, 1.0, 2.0, 2, &grid),
            Err(Error::UnsupportedExponent(_))
        ));
    }

    #[test]
    fn der_hypotheses_examples() {
        let m = m2();
        let grid = Grid::standard(&m, 1.0, 6);
        let c = m.element(vec![1.0, 2.0, -0.5, 0.0]).unwrap();
        let d = MapSpec::inner_derivation(m.clone(), &c).unwrap();
        let (cr, dr) = check_der_hypotheses(&d, 0.0, 0.5, 2, LeibnizWeight::SumOfPowers, &grid).unwrap();
        assert!(cr.sup_value <= 1e-12 && dr.sup_value <= 1e-12);
        assert!(cr.satisfied && dr.satisfied);

        let eta = 0.1;
        let f = d
            .clone()
            .with_perturbation(Perturbation::PowerNoise {
                eps: eta,
                p: 0.5,
                quantization_step: DEFAULT_QUANTIZATION,
                seed: 8,
                support: None,
            })
            .unwrap();
        let (cr, _) = check_der_hypotheses(&f, 3.0 * eta, 0.5, 2, LeibnizWeight::SumOfPowers, &grid).unwrap();
        assert!(cr.satisfied);

        let (_, dr) = check_der_hypotheses(&d, 0.0, 0.5, 3, LeibnizWeight::ProductOfPowers { q: 0.5 }, &grid).unwrap();
        assert!(dr.sup_value <= 1e-12);

        let hom = MapSpec::identity(m.clone());
        assert!(matches!(
            check_der_hypotheses(&hom, 0.0, 1.0, 2, LeibnizWeight::SumOfPowers, &grid),
            Err(Error::UnsupportedExponent(_))
        ));
    }

    #[test]
    fn orthogonality_examples() {
        let m = m2();
        let grid = Grid::standard(&m, 1.0, 9);
        let h = MapSpec::identity(m.clone());
        let tuples = tuples_of(&grid, 3, 64);
        let rep = orthogonality_check(&h, &h, &tuples, 1..=2).unwrap();
        assert_eq!(rep.sup_value, 0.0);

        // scalar case: bounded noise on ℝ, h = identity
        let r = reals();
        let rg = Grid::standard(&r, 1.0, 9);
        let id = MapSpec::identity(r.clone());
        let f = make_perturbed_hom(&id, 3, 0.25, DEFAULT_QUANTIZATION, 1).unwrap();
        let sched = Schedule::dyadic(60, 1e-13).unwrap().with_budget(Growth::Bounded { eps: 0.25 }).unwrap();
        let lim = build_limit_map(&f, &sched, &r.basis_elements()).unwrap();
        let rep = mixed_product_check(&lim, &lim, &tuples_of(&rg, 3, 64), 1..=2).unwrap();
        assert!(rep.sup_value <= 1e-12);
        assert!(orthogonality_check(&f, &lim, &tuples, 1..=2).is_err());
        assert!(orthogonality_check(&h, &h, &tuples, 0..=2).is_err());
    }

    #[test]
    fn homogeneity_examples() {
        let r = reals();
        let grid = Grid::standard(&r, 5.0, 1);
        for c in [-2.0, 0.5, 7.0] {
            let f = MapSpec::linear(r.clone(), Target::Algebra(r.clone()), vec![c]).unwrap().homogeneous().unwrap();
            let d = build_limit_map(&f, &Schedule::dyadic(60, 1e-12).unwrap(), &r.basis_elements()).unwrap();
            let rep = homogeneity_implies_equality(&f, &d, &grid).unwrap();
            assert_eq!(rep.sup_value, 0.0);
        }
        let g = MapSpec::identity(r.clone());
        assert!(matches!(homogeneity_implies_equality(&g, &g, &grid), Err(Error::NotHomogeneous)));

        let sq = MapSpec::zero(r.clone(), Target::Algebra(r.clone()))
            .with_perturbation(Perturbation::CustomPolynomial {
                terms: vec![PolyTerm { output: 0, input: 0, power: 1, coefficient: 2.0 }],
            })
            .unwrap()
            .homogeneous()
            .unwrap();
        let rep = homogeneity_implies_equality(&sq, &sq, &grid).unwrap();
        assert!(rep.satisfied);
    }

    #[test]
    fn witness_reproduces_sup() {
        let m = m2();
        let grid = Grid::standard(&m, 1.0, 12);
        let f = make_perturbed_hom(&MapSpec::identity(m.clone()), 2, 0.5, DEFAULT_QUANTIZATION, 5).unwrap();
        let rep = cauchy_ratio(&f, 0.0, Some(1.5), &grid).unwrap();
        let (a, b) = (&rep.witness[0], &rep.witness[1]);
        let again = cauchy_defect_coords(&f, a, b) / 2.0;
        assert_eq!(again, rep.sup_value);
    }

    #[test]
    fn sup_prefers_first_occurrence() {
        let items = [1.0, 3.0, 3.0, 2.0];
        let s = sup_over(&items, |v| Some((*v, vec![vec![*v]])));
        assert_eq!(s.value, 3.0);
        assert_eq!(s.samples, 4);
        let idx = [0usize, 1, 2, 3];
        let s = sup_over(&idx, |i| Some((items[*i], vec![vec![*i as f64]])));
        assert_eq!(s.witness, vec![vec![1.0]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn enlarging_the_grid_never_lowers_the_sup(seed in 0u64..1000, extra in 0u64..1000) {
            let r = reals();
            let f = make_perturbed_hom(&MapSpec::identity(r.clone()), 2, 0.5, DEFAULT_QUANTIZATION, seed).unwrap();
            let h = MapSpec::identity(r.clone());
            let g = Grid::standard(&r, 3.0, seed);
            let mut big = g.clone();
            big.extend(&Grid::standard(&r, 7.0, extra)).unwrap();
            let a = check_hyers_bound(&f, &h, 0.5, &g).unwrap().sup_value;
            let b = check_hyers_bound(&f, &h, 0.5, &big).unwrap().sup_value;
            prop_assert!(b >= a);
        }

        #[test]
        fn satisfied_matches_comparison(sup in 0.0f64..2.0, bound in 0.0f64..2.0, tol in 0.0f64..0.1) {
            let s = Sup { value: sup, witness: vec![], samples: 1 };
            let r = DefectReport::new("x", s, Some(bound), tol);
            prop_assert_eq!(r.satisfied, sup <= bound + tol);
        }
    }
}
