//! Deterministic maps between algebras (or into bimodules) and their
//! defect functionals.
//!
//! A [`MapSpec`] is an exact linear part plus a perturbation drawn from a
//! small catalog. Perturbations are pure functions of the argument: noise
//! families hash the quantized coordinates instead of consulting an RNG, so
//! the direct method sees one fixed map no matter how often it re-evaluates
//! it.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, Bimodule, Element, SpaceId};
use crate::error::{Error, Result};
use crate::rng::{quantized_key, signed_unit_at, unit_at};

/// Default quantization step of the noise families, `2^-20`.
pub const DEFAULT_QUANTIZATION: f64 = 1.0 / 1_048_576.0;

/// Codomain of a map.
#[derive(Clone, Debug)]
pub enum Target {
    Algebra(Arc<Algebra>),
    Module(Arc<Bimodule>),
}

impl Target {
    pub fn id(&self) -> SpaceId {
        match self {
            Target::Algebra(a) => a.id(),
            Target::Module(m) => m.id(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Target::Algebra(a) => a.dim(),
            Target::Module(m) => m.dim(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Target::Algebra(a) => a.name(),
            Target::Module(m) => m.name(),
        }
    }

    pub fn norm_coords(&self, x: &[f64]) -> f64 {
        match self {
            Target::Algebra(a) => a.norm_coords(x),
            Target::Module(m) => m.norm_coords(x),
        }
    }

    pub fn as_algebra(&self) -> Option<&Algebra> {
        match self {
            Target::Algebra(a) => Some(a),
            Target::Module(_) => None,
        }
    }
}

/// One monomial `coefficient · a[input]^power`, added to output coordinate
/// `output`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub output: usize,
    pub input: usize,
    pub power: u32,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Perturbation {
    None,
    /// `amplitude · sin` applied to each coordinate of the linear image.
    SineBump { amplitude: f64 },
    /// Hash-driven vector of norm at most `eps`, constant on cells of the
    /// quantization lattice. `support` spans the directions it may use; the
    /// whole codomain when absent.
    HashNoise {
        eps: f64,
        quantization_step: f64,
        seed: u64,
        support: Option<Vec<Vec<f64>>>,
    },
    /// Like `HashNoise` but with norm at most `eps · ‖a‖^p`; zero at `a = 0`.
    PowerNoise {
        eps: f64,
        p: f64,
        quantization_step: f64,
        seed: u64,
        support: Option<Vec<Vec<f64>>>,
    },
    /// `φ(x) = x ln|x|` for `|x| > 1`, else 0, placed on codomain coordinate
    /// `slot`. Scalar domain only.
    LogMap { slot: usize },
    CustomPolynomial { terms: Vec<PolyTerm> },
}

impl Perturbation {
    pub fn family(&self) -> &'static str {
        match self {
            Perturbation::None => "none",
            Perturbation::SineBump { .. } => "sine_bump",
            Perturbation::HashNoise { .. } => "hash_noise",
            Perturbation::PowerNoise { .. } => "power_noise",
            Perturbation::LogMap { .. } => "log_map",
            Perturbation::CustomPolynomial { .. } => "custom_polynomial",
        }
    }

    fn is_scale_equivariant(&self) -> bool {
        match self {
            Perturbation::None => true,
            Perturbation::CustomPolynomial { terms } => terms.iter().all(|t| t.power == 1),
            _ => false,
        }
    }
}

/// `φ(x) = x ln|x|` for `|x| > 1` and `0` on `[-1, 1]`.
pub fn log_map_phi(x: f64) -> f64 {
    if x.abs() > 1.0 {
        x * x.abs().ln()
    } else {
        0.0
    }
}

/// Anything that maps domain coordinates to codomain coordinates.
pub trait Mapping: Sync {
    fn domain(&self) -> &Algebra;
    fn codomain(&self) -> &Target;
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// Whether `f(ca) = c f(a)` holds by construction.
    fn is_homogeneous(&self) -> bool {
        false
    }

    fn eval(&self, a: &Element) -> Result<Element> {
        if a.space() != self.domain().id() {
            return Err(Error::DomainMismatch);
        }
        Ok(Element::from_raw(self.codomain().id(), self.apply(a.coords())))
    }
}

/// Closed-form map `f = L + ν` with `L` linear and `ν` from the catalog.
#[derive(Clone, Debug)]
pub struct MapSpec {
    label: String,
    domain: Arc<Algebra>,
    codomain: Target,
    /// Row-major `codomain.dim() × domain.dim()`.
    base_linear: Vec<f64>,
    perturbation: Perturbation,
    homogeneous: bool,
}

impl MapSpec {
    pub fn linear(domain: Arc<Algebra>, codomain: Target, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != domain.dim() * codomain.dim() {
            return Err(Error::InvalidMap(format!(
                "linear part has {} entries, expected {}",
                matrix.len(),
                domain.dim() * codomain.dim()
            )));
        }
        if matrix.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMap("non-finite linear coefficient".into()));
        }
        Ok(MapSpec {
            label: "linear".into(),
            domain,
            codomain,
            base_linear: matrix,
            perturbation: Perturbation::None,
            homogeneous: false,
        })
    }

    /// Linear map given by the images of the domain basis.
    pub fn from_basis_images(
        domain: Arc<Algebra>,
        codomain: Target,
        images: &[Vec<f64>],
    ) -> Result<Self> {
        let (n, m) = (domain.dim(), codomain.dim());
        if images.len() != n || images.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidMap("basis images have the wrong shape".into()));
        }
        let mut matrix = vec![0.0; m * n];
        for (j, col) in images.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                matrix[i * n + j] = *v;
            }
        }
        MapSpec::linear(domain, codomain, matrix)
    }

    pub fn identity(alg: Arc<Algebra>) -> Self {
        let d = alg.dim();
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            matrix[i * d + i] = 1.0;
        }
        MapSpec::linear(alg.clone(), Target::Algebra(alg), matrix).expect("square identity")
    }

    pub fn zero(domain: Arc<Algebra>, codomain: Target) -> Self {
        let len = domain.dim() * codomain.dim();
        MapSpec::linear(domain, codomain, vec![0.0; len]).expect("zero map")
    }

    /// Inner derivation `D(a) = a m − m a` into the regular bimodule.
    pub fn inner_derivation(alg: Arc<Algebra>, m: &Element) -> Result<Self> {
        let module = Arc::new(Bimodule::regular(&alg));
        let images: Vec<Vec<f64>> = alg
            .basis_elements()
            .iter()
            .map(|e| {
                let am = alg.mul_coords(e.coords(), m.coords());
                let ma = alg.mul_coords(m.coords(), e.coords());
                am.iter().zip(&ma).map(|(x, y)| x - y).collect()
            })
            .collect();
        Ok(MapSpec::from_basis_images(alg, Target::Module(module), &images)?.labeled("inner_derivation"))
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Result<Self> {
        let codim = self.codomain.dim();
        let check_support = |support: &Option<Vec<Vec<f64>>>| -> Result<()> {
            if let Some(s) = support {
                if s.is_empty() || s.iter().any(|v| v.len() != codim) {
                    return Err(Error::InvalidMap("noise support has the wrong shape".into()));
                }
            }
            Ok(())
        };
        match &perturbation {
            Perturbation::None => {}
            Perturbation::SineBump { amplitude } => {
                if !amplitude.is_finite() {
                    return Err(Error::InvalidMap("non-finite sine amplitude".into()));
                }
            }
            Perturbation::HashNoise { eps, quantization_step, support, .. } => {
                if !(eps.is_finite() && *eps >= 0.0) {
                    return Err(Error::InvalidEps(*eps));
                }
                if !(quantization_step.is_finite() && *quantization_step > 0.0) {
                    return Err(Error::InvalidMap("quantization step must be positive".into()));
                }
                check_support(support)?;
            }
            Perturbation::PowerNoise { eps, p, quantization_step, support, .. } => {
                if !(eps.is_finite() && *eps >= 0.0) {
                    return Err(Error::InvalidEps(*eps));
                }
                if !(p.is_finite() && *p >= 0.0) {
                    return Err(Error::UnsupportedExponent(*p));
                }
                if !(quantization_step.is_finite() && *quantization_step > 0.0) {
                    return Err(Error::InvalidMap("quantization step must be positive".into()));
                }
                check_support(support)?;
            }
            Perturbation::LogMap { slot } => {
                if self.domain.dim() != 1 {
                    return Err(Error::InvalidMap("log_map needs a scalar domain".into()));
                }
                if *slot >= codim {
                    return Err(Error::InvalidMap("log_map slot out of range".into()));
                }
            }
            Perturbation::CustomPolynomial { terms } => {
                if terms.iter().any(|t| {
                    t.output >= codim || t.input >= self.domain.dim() || !t.coefficient.is_finite()
                }) {
                    return Err(Error::InvalidMap("polynomial term out of range".into()));
                }
            }
        }
        if self.homogeneous && !perturbation.is_scale_equivariant() {
            return Err(Error::NotHomogeneous);
        }
        if self.label == "linear" {
            self.label = perturbation.family().into();
        }
        self.perturbation = perturbation;
        Ok(self)
    }

    /// Declares `f(ca) = c f(a)`. Only scale-equivariant perturbations allow it.
    pub fn homogeneous(mut self) -> Result<Self> {
        if !self.perturbation.is_scale_equivariant() {
            return Err(Error::NotHomogeneous);
        }
        self.homogeneous = true;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn base_linear(&self) -> &[f64] {
        &self.base_linear
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    pub fn domain_arc(&self) -> &Arc<Algebra> {
        &self.domain
    }

    /// The exact linear part as a map of its own.
    pub fn linear_part(&self) -> MapSpec {
        MapSpec {
            label: format!("{} (linear part)", self.label),
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            base_linear: self.base_linear.clone(),
            perturbation: Perturbation::None,
            homogeneous: false,
        }
    }

    pub fn apply_linear(&self, x: &[f64]) -> Vec<f64> {
        let n = self.domain.dim();
        self.base_linear
            .chunks_exact(n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// The perturbation term `ν(x)` alone.
    pub fn perturbation_at(&self, x: &[f64], linear: &[f64]) -> Vec<f64> {
        let codim = self.codomain.dim();
        match &self.perturbation {
            Perturbation::None => vec![0.0; codim],
            Perturbation::SineBump { amplitude } => {
                linear.iter().map(|v| amplitude * v.sin()).collect()
            }
            Perturbation::HashNoise { eps, quantization_step, seed, support } => {
                let key = quantized_key(*seed, x, *quantization_step);
                self.noise_vector(key, *eps, support.as_deref())
            }
            Perturbation::PowerNoise { eps, p, quantization_step, seed, support } => {
                let r = self.domain.norm_coords(x);
                if r == 0.0 {
                    return vec![0.0; codim];
                }
                let key = quantized_key(*seed, x, *quantization_step);
                self.noise_vector(key, eps * r.powf(*p), support.as_deref())
            }
            Perturbation::LogMap { slot } => {
                let mut v = vec![0.0; codim];
                v[*slot] = log_map_phi(x[0]);
                v
            }
            Perturbation::CustomPolynomial { terms } => {
                let mut v = vec![0.0; codim];
                for t in terms {
                    v[t.output] += t.coefficient * x[t.input].powi(t.power as i32);
                }
                v
            }
        }
    }

    /// Vector of norm `radius · r` with `r ∈ [0, 1)` and direction both
    /// drawn from the counter stream at `key`.
    fn noise_vector(&self, key: u64, radius: f64, support: Option<&[Vec<f64>]>) -> Vec<f64> {
        let codim = self.codomain.dim();
        let mut v = vec![0.0; codim];
        match support {
            None => {
                for (i, c) in v.iter_mut().enumerate() {
                    *c = signed_unit_at(key, i as u64 + 1);
                }
            }
            Some(basis) => {
                for (j, b) in basis.iter().enumerate() {
                    let w = signed_unit_at(key, j as u64 + 1);
                    for (c, bi) in v.iter_mut().zip(b) {
                        *c += w * bi;
                    }
                }
            }
        }
        let norm = self.codomain.norm_coords(&v);
        if norm == 0.0 || radius == 0.0 {
            return vec![0.0; codim];
        }
        let target = radius * unit_at(key, 0);
        let s = target / norm;
        v.iter_mut().for_each(|c| *c *= s);
        let got = self.codomain.norm_coords(&v);
        if got > radius {
            let fix = radius / got;
            v.iter_mut().for_each(|c| *c *= fix);
        }
        v
    }
}

impl Mapping for MapSpec {
    fn domain(&self) -> &Algebra {
        &self.domain
    }

    fn codomain(&self) -> &Target {
        &self.codomain
    }

    fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.apply_linear(x);
        if self.perturbation != Perturbation::None {
            let nu = self.perturbation_at(x, &y);
            y.iter_mut().zip(nu).for_each(|(a, b)| *a += b);
        }
        y
    }
}

/// Hypothesis constants of the stability statements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectBudget {
    pub eps: f64,
    pub delta: f64,
    pub p: f64,
    pub q: f64,
    pub n: usize,
}

impl DefectBudget {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArity(self.n));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::InvalidEps(self.eps));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidEps(self.delta));
        }
        Ok(())
    }
}

/// Largest `‖h(a_1⋯a_n) − h(a_1)⋯h(a_n)‖` over all basis tuples when that
/// enumeration is small, otherwise over the supplied fallback tuples. Both
/// sides are multilinear, so the basis enumeration is a proof for linear `h`.
fn basis_hom_defect(h: &MapSpec, n: usize) -> Result<f64> {
    let d = h.domain.dim();
    let total = d.checked_pow(n as u32).unwrap_or(usize::MAX);
    if total > 200_000 {
        return Err(Error::InvalidMap("too many basis tuples to certify".into()));
    }
    let basis = h.domain.basis_elements();
    let mut idx = vec![0usize; n];
    let mut worst = 0.0f64;
    for _ in 0..total {
        let tuple: Vec<Element> = idx.iter().map(|&i| basis[i].clone()).collect();
        worst = worst.max(hom_defect(h, &tuple)?);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < d {
                break;
            }
            *slot = 0;
        }
    }
    Ok(worst)
}

/// Orthonormal basis (Euclidean in coordinates) of the two-sided annihilator
/// `{x : b x = x b = 0 for every b in span(images)}`; `None` if it is `{0}`.
pub fn annihilator_support(alg: &Algebra, images: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = alg.dim();
    let nonzero: Vec<&Vec<f64>> = images.iter().filter(|v| v.iter().any(|c| *c != 0.0)).collect();
    if nonzero.is_empty() {
        return Some(
            (0..d)
                .map(|i| {
                    let mut v = vec![0.0; d];
                    v[i] = 1.0;
                    v
                })
                .collect(),
        );
    }
    // rows: coordinates of b·e_k and e_k·b as functions of x = Σ x_k e_k
    let rows = 2 * nonzero.len() * d;
    let mut a = DMatrix::<f64>::zeros(rows.max(d), d);
    for (bi, b) in nonzero.iter().enumerate() {
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            let left = alg.mul_coords(b, &e);
            let right = alg.mul_coords(&e, b);
            for l in 0..d {
                a[(2 * bi * d + l, k)] = left[l];
                a[((2 * bi + 1) * d + l, k)] = right[l];
            }
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = 1e-10 * sigma_max.max(1.0);
    let mut basis = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= cutoff {
            basis.push(v_t.row(i).iter().copied().collect::<Vec<f64>>());
        }
    }
    // right-singular vectors beyond the number of singular values (none when rows ≥ d)
    if basis.is_empty() {
        None
    } else {
        Some(basis)
    }
}

fn certify_hom(h0: &MapSpec, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArity(n));
    }
    if h0.perturbation != Perturbation::None {
        return Err(Error::InvalidMap("base map must be exactly linear".into()));
    }
    if h0.codomain.as_algebra().is_none() {
        return Err(Error::CodomainNotAlgebra);
    }
    let defect = basis_hom_defect(h0, n)?;
    let scale: f64 = h0.base_linear.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
    if defect > 1e-12 * scale.powi(n as i32) {
        return Err(Error::NotHomomorphism { n, defect });
    }
    Ok(())
}

fn image_vectors(h0: &MapSpec) -> Vec<Vec<f64>> {
    h0.domain.basis_elements().iter().map(|e| h0.apply_linear(e.coords())).collect()
}

/// `f = h0 + ν` with `‖ν(a)‖ ≤ eps` a hash of the quantized argument.
///
/// `h0` must be an exact linear `n`-ring homomorphism. The noise lives in the
/// two-sided annihilator of `h0`'s image when that subspace is nonzero, which
/// makes the product defect of `f` globally bounded. Otherwise it uses the
/// whole codomain.
pub fn make_perturbed_hom(
    h0: &MapSpec,
    n: usize,
    eps: f64,
    quantization_step: f64,
    seed: u64,
) -> Result<MapSpec> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidEps(eps));
    }
    certify_hom(h0, n)?;
    let alg = h0.codomain.as_algebra().expect("certified");
    let support = annihilator_support(alg, &image_vectors(h0));
    let f = h0.clone().with_perturbation(Perturbation::HashNoise {
        eps,
        quantization_step,
        seed,
        support,
    })?;
    Ok(f.labeled(format!("{} + hash_noise", h0.label)))
}

/// `f = h0 + ν` with `‖ν(a)‖ ≤ eps ‖a‖^p`; same support rule as
/// [`make_perturbed_hom`].
pub fn make_power_perturbed_hom(
    h0: &MapSpec,
    n: usize,
    eps: f64,
    p: f64,
    quantization_step: f64,
    seed: u64,
) -> Result<MapSpec> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidEps(eps));
    }
    certify_hom(h0, n)?;
    let alg = h0.codomain.as_algebra().expect("certified");
    let support = annihilator_support(alg, &image_vectors(h0));
    let f = h0.clone().with_perturbation(Perturbation::PowerNoise {
        eps,
        p,
        quantization_step,
        seed,
        support,
    })?;
    Ok(f.labeled(format!("{} + power_noise", h0.label)))
}

fn check_domain<M: Mapping + ?Sized>(f: &M, elems: &[&Element]) -> Result<()> {
    let id = f.domain().id();
    if elems.iter().any(|e| e.space() != id) {
        return Err(Error::DomainMismatch);
    }
    Ok(())
}

/// `‖f(a+b) − f(a) − f(b)‖` on raw coordinates.
pub fn cauchy_defect_coords<M: Mapping + ?Sized>(f: &M, a: &[f64], b: &[f64]) -> f64 {
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let fs = f.apply(&sum);
    let fa = f.apply(a);
    let fb = f.apply(b);
    let diff: Vec<f64> = fs.iter().zip(fa.iter().zip(&fb)).map(|(s, (x, y))| s - (x + y)).collect();
    f.codomain().norm_coords(&diff)
}

pub fn cauchy_defect<M: Mapping + ?Sized>(f: &M, a: &Element, b: &Element) -> Result<f64> {
    check_domain(f, &[a, b])?;
    Ok(cauchy_defect_coords(f, a.coords(), b.coords()))
}

/// `‖f(a_1⋯a_n) − f(a_1)⋯f(a_n)‖` on raw coordinates.
pub fn hom_defect_coords<M: Mapping + ?Sized>(f: &M, tuple: &[&[f64]]) -> Result<f64> {
    let alg = f.codomain().as_algebra().ok_or(Error::CodomainNotAlgebra)?;
    let dom = f.domain();
    let prod = dom.chain_coords(tuple.iter().copied()).ok_or(Error::EmptyChain)?;
    let lhs = f.apply(&prod);
    let images: Vec<Vec<f64>> = tuple.iter().map(|a| f.apply(a)).collect();
    let rhs = alg.chain_coords(images.iter().map(|v| v.as_slice())).expect("nonempty");
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect();
    Ok(alg.norm_coords(&diff))
}

pub fn hom_defect<M: Mapping + ?Sized>(f: &M, tuple: &[Element]) -> Result<f64> {
    if tuple.is_empty() {
        return Err(Error::EmptyChain);
    }
    if tuple.len() < 2 {
        return Err(Error::InvalidArity(tuple.len()));
    }
    check_domain(f, &tuple.iter().collect::<Vec<_>>())?;
    let coords: Vec<&[f64]> = tuple.iter().map(|e| e.coords()).collect();
    hom_defect_coords(f, &coords)
}

enum Actions<'a> {
    Algebra(&'a Algebra),
    Module(&'a Bimodule),
}

impl Actions<'_> {
    fn left(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        match self {
            Actions::Algebra(alg) => alg.mul_coords(a, x),
            Actions::Module(m) => m.left_coords(a, x),
        }
    }

    fn right(&self, x: &[f64], a: &[f64]) -> Vec<f64> {
        match self {
            Actions::Algebra(alg) => alg.mul_coords(x, a),
            Actions::Module(m) => m.right_coords(x, a),
        }
    }
}

fn actions<M: Mapping + ?Sized>(f: &M) -> Result<Actions<'_>> {
    let dom = f.domain().id();
    match f.codomain() {
        Target::Algebra(a) if a.id() == dom => Ok(Actions::Algebra(a)),
        Target::Module(m) if m.base() == dom => Ok(Actions::Module(m)),
        _ => Err(Error::CodomainNotModule),
    }
}

/// The Leibniz sum `Σ_j (a_1⋯a_{j-1})·f(a_j)·(a_{j+1}⋯a_n)` on raw coordinates.
pub fn leibniz_sum<M: Mapping + ?Sized>(f: &M, tuple: &[&[f64]]) -> Result<Vec<f64>> {
    let act = actions(f)?;
    let dom = f.domain();
    let n = tuple.len();
    // suffix[j] = a_{j+1} ⋯ a_n (None past the end)
    let mut suffix: Vec<Option<Vec<f64>>> = vec![None; n];
    for j in (0..n.saturating_sub(1)).rev() {
        suffix[j] = Some(match &suffix[j + 1] {
            None => tuple[j + 1].to_vec(),
            Some(s) => dom.mul_coords(tuple[j + 1], s),
        });
    }
    let mut total = vec![0.0; f.codomain().dim()];
    let mut prefix: Option<Vec<f64>> = None;
    for j in 0..n {
        let mut term = f.apply(tuple[j]);
        if let Some(p) = &prefix {
            term = act.left(p, &term);
        }
        if let Some(s) = &suffix[j] {
            term = act.right(&term, s);
        }
        total.iter_mut().zip(&term).for_each(|(t, x)| *t += x);
        prefix = Some(match prefix {
            None => tuple[j].to_vec(),
            Some(p) => dom.mul_coords(&p, tuple[j]),
        });
    }
    Ok(total)
}

/// `‖f(a_1⋯a_n) − Σ_j (a_1⋯a_{j-1})·f(a_j)·(a_{j+1}⋯a_n)‖` on raw coordinates.
pub fn der_defect_coords<M: Mapping + ?Sized>(f: &M, tuple: &[&[f64]]) -> Result<f64> {
    let sum = leibniz_sum(f, tuple)?;
    let prod = f.domain().chain_coords(tuple.iter().copied()).ok_or(Error::EmptyChain)?;
    let lhs = f.apply(&prod);
    let diff: Vec<f64> = lhs.iter().zip(&sum).map(|(x, y)| x - y).collect();
    Ok(f.codomain().norm_coords(&diff))
}

pub fn der_defect<M: Mapping + ?Sized>(f: &M, tuple: &[Element]) -> Result<f64> {
    if tuple.is_empty() {
        return Err(Error::EmptyChain);
    }
    if tuple.len() < 2 {
        return Err(Error::InvalidArity(tuple.len()));
    }
    check_domain(f, &tuple.iter().collect::<Vec<_>>())?;
    let coords: Vec<&[f64]> = tuple.iter().map(|e| e.coords()).collect();
    der_defect_coords(f, &coords)
}
