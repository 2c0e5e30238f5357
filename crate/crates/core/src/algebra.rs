//! Finite-dimensional real normed associative algebras and bimodules.
//!
//! An [`Algebra`] is described by its structure constants
//! `e_i e_j = Σ_k c[i][j][k] e_k` stored densely, together with a norm.
//! Construction validates associativity and, unless the algebra is realized
//! by matrix units under the Frobenius norm, checks submultiplicativity
//! `‖ab‖ ≤ ‖a‖‖b‖` on a deterministic sample of pairs. Every value is
//! immutable once built.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, splitmix64};

/// Pairs sampled when checking submultiplicativity.
pub const SUBMULT_SAMPLES: usize = 10_000;
/// Associativity tolerance for non-integral structure constants.
pub const ASSOC_TOL: f64 = 1e-12;

const VALIDATION_SEED: u64 = 0x00A1_6EB2_A5EE_D000;

/// Fingerprint identifying an algebra or bimodule; elements carry it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceId(pub u64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    /// Absolute value; one-dimensional spaces only.
    Abs,
    /// Euclidean norm of the coordinates. Equals the Frobenius norm of the
    /// matrix realization when the basis consists of matrix units.
    Frobenius,
    WeightedL1 { weights: Vec<f64> },
}

impl NormKind {
    pub fn eval(&self, coords: &[f64]) -> f64 {
        match self {
            NormKind::Abs => coords[0].abs(),
            NormKind::Frobenius => coords.iter().map(|c| c * c).sum::<f64>().sqrt(),
            NormKind::WeightedL1 { weights } => {
                coords.iter().zip(weights).map(|(c, w)| w * c.abs()).sum()
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<(), String> {
        match self {
            NormKind::Abs if dim != 1 => Err(format!("abs norm needs dim 1, got {dim}")),
            NormKind::WeightedL1 { weights } => {
                if weights.len() != dim {
                    return Err(format!("{} weights for dim {dim}", weights.len()));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err("weights must be positive and finite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn fingerprint(&self, mut h: u64) -> u64 {
        match self {
            NormKind::Abs => splitmix64(h ^ 1),
            NormKind::Frobenius => splitmix64(h ^ 2),
            NormKind::WeightedL1 { weights } => {
                h = splitmix64(h ^ 3);
                for w in weights {
                    h = splitmix64(h ^ w.to_bits());
                }
                h
            }
        }
    }
}

/// Realization of an algebra inside `size × size` real matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEmbedding {
    pub size: usize,
    /// `(row, col)` of the matrix unit for each basis element, zero-based.
    pub units: Option<Vec<(usize, usize)>>,
}

/// Coordinate vector of an element of some algebra or bimodule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Element {
    space: SpaceId,
    coords: Vec<f64>,
}

impl Element {
    pub(crate) fn from_raw(space: SpaceId, coords: Vec<f64>) -> Self {
        Element { space, coords }
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn add(&self, other: &Element) -> Result<Element> {
        if self.space != other.space {
            return Err(Error::AlgebraMismatch);
        }
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect();
        Ok(Element::from_raw(self.space, coords))
    }

    pub fn sub(&self, other: &Element) -> Result<Element> {
        if self.space != other.space {
            return Err(Error::AlgebraMismatch);
        }
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect();
        Ok(Element::from_raw(self.space, coords))
    }

    pub fn scale(&self, t: f64) -> Element {
        Element::from_raw(self.space, self.coords.iter().map(|c| t * c).collect())
    }
}

/// Plain-data description of an algebra, as read from a definition file.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct AlgebraDef {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    /// `(i, j, k, value)` quadruples: `e_i e_j` has `value` on `e_k`.
    pub structure: Vec<(usize, usize, usize, Number)>,
    pub norm_kind: String,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub matrix_embedding: Option<usize>,
    #[serde(default)]
    pub matrix_units: Option<Vec<(usize, usize)>>,
}

/// Integer or float literal in a definition file.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    pub fn value(self) -> f64 {
        match self {
            Number::Int(i) => i as f64,
            Number::Float(f) => f,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Algebra {
    name: String,
    labels: Vec<String>,
    dim: usize,
    /// `c[(i * dim + j) * dim + k]`
    structure: Vec<f64>,
    norm: NormKind,
    embedding: Option<MatrixEmbedding>,
    id: SpaceId,
}

impl Algebra {
    /// Builds and validates an algebra from dense structure constants.
    pub fn new(
        name: impl Into<String>,
        labels: Vec<String>,
        dim: usize,
        structure: Vec<f64>,
        norm: NormKind,
        embedding: Option<MatrixEmbedding>,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |msg: String| Error::InvalidAlgebra(format!("{name}: {msg}"));
        if dim == 0 {
            return Err(invalid("dimension must be positive".into()));
        }
        if labels.len() != dim {
            return Err(invalid(format!("{} labels for dim {dim}", labels.len())));
        }
        if structure.len() != dim * dim * dim {
            return Err(invalid(format!("structure tensor has {} entries", structure.len())));
        }
        if structure.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite structure constant".into()));
        }
        norm.validate(dim).map_err(invalid)?;

        let mut h = splitmix64(dim as u64 ^ 0xA16E_B2A0);
        for c in &structure {
            h = splitmix64(h ^ c.to_bits());
        }
        h = norm.fingerprint(h);

        let alg = Algebra {
            name: name.clone(),
            labels,
            dim,
            structure,
            norm,
            embedding,
            id: SpaceId(h),
        };

        let residual = alg.associativity_residual();
        if residual > ASSOC_TOL {
            return Err(invalid(format!("not associative (residual {residual:e})")));
        }
        let exempt = alg.check_embedding().map_err(invalid)?;
        alg.check_norm_positivity().map_err(invalid)?;
        if !exempt {
            alg.check_submultiplicative(SUBMULT_SAMPLES).map_err(invalid)?;
        }
        Ok(alg)
    }

    /// The real line with the absolute value.
    pub fn reals() -> Self {
        Algebra::new("R", vec!["1".into()], 1, vec![1.0], NormKind::Abs, None)
            .expect("the reals are a Banach algebra")
    }

    /// Full matrix algebra `M_k(R)` with the Frobenius norm.
    pub fn matrix(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidAlgebra("matrix size must be positive".into()));
        }
        let units = (0..k).flat_map(|r| (0..k).map(move |c| (r, c))).collect();
        Algebra::from_matrix_units(format!("M{k}"), k, units)
    }

    /// Subalgebra of `M_size(R)` spanned by the given matrix units, with the
    /// Frobenius norm. Fails if the span is not closed under multiplication.
    pub fn from_matrix_units(
        name: impl Into<String>,
        size: usize,
        units: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let name = name.into();
        let dim = units.len();
        if dim == 0 {
            return Err(Error::InvalidAlgebra(format!("{name}: no matrix units")));
        }
        if units.iter().any(|&(r, c)| r >= size || c >= size) {
            return Err(Error::InvalidAlgebra(format!("{name}: unit out of range")));
        }
        let mut structure = vec![0.0; dim * dim * dim];
        for (i, &(a, b)) in units.iter().enumerate() {
            for (j, &(c, d)) in units.iter().enumerate() {
                if b != c {
                    continue;
                }
                let k = units.iter().position(|&u| u == (a, d)).ok_or_else(|| {
                    Error::InvalidAlgebra(format!("{name}: units not closed under product"))
                })?;
                structure[(i * dim + j) * dim + k] = 1.0;
            }
        }
        let labels = units.iter().map(|(r, c)| format!("e{}{}", r + 1, c + 1)).collect();
        Algebra::new(
            name,
            labels,
            dim,
            structure,
            NormKind::Frobenius,
            Some(MatrixEmbedding { size, units: Some(units) }),
        )
    }

    pub fn from_def(def: &AlgebraDef) -> Result<Self> {
        let name = def.name.clone().unwrap_or_else(|| "custom".into());
        let dim = def.dim;
        let labels = def
            .labels
            .clone()
            .unwrap_or_else(|| (0..dim).map(|i| format!("e{i}")).collect());
        let mut structure = vec![0.0; dim * dim * dim];
        for &(i, j, k, v) in &def.structure {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::InvalidAlgebra(format!(
                    "{name}: structure index ({i},{j},{k}) out of range"
                )));
            }
            structure[(i * dim + j) * dim + k] += v.value();
        }
        let norm = match def.norm_kind.as_str() {
            "abs" => NormKind::Abs,
            "frobenius" => NormKind::Frobenius,
            "weighted_l1" => NormKind::WeightedL1 {
                weights: def.weights.clone().unwrap_or_else(|| vec![1.0; dim]),
            },
            other => {
                return Err(Error::InvalidAlgebra(format!("{name}: unknown norm_kind {other:?}")))
            }
        };
        let embedding = def.matrix_embedding.map(|size| MatrixEmbedding {
            size,
            units: def.matrix_units.clone(),
        });
        Algebra::new(name, labels, dim, structure, norm, embedding)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let def: AlgebraDef =
            toml::from_str(text).map_err(|e| Error::InvalidAlgebra(e.to_string()))?;
        Algebra::from_def(&def)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Algebra::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn norm_kind(&self) -> &NormKind {
        &self.norm
    }

    pub fn embedding(&self) -> Option<&MatrixEmbedding> {
        self.embedding.as_ref()
    }

    #[inline]
    pub fn structure_const(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn element(&self, coords: Vec<f64>) -> Result<Element> {
        if coords.len() != self.dim {
            return Err(Error::AlgebraMismatch);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidAlgebra("non-finite coordinate".into()));
        }
        Ok(Element::from_raw(self.id, coords))
    }

    pub fn zero(&self) -> Element {
        Element::from_raw(self.id, vec![0.0; self.dim])
    }

    pub fn basis(&self, i: usize) -> Element {
        let mut coords = vec![0.0; self.dim];
        coords[i] = 1.0;
        Element::from_raw(self.id, coords)
    }

    pub fn basis_elements(&self) -> Vec<Element> {
        (0..self.dim).map(|i| self.basis(i)).collect()
    }

    pub fn mul_coords(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                if bj == 0.0 {
                    continue;
                }
                let w = ai * bj;
                let row = &self.structure[(i * d + j) * d..(i * d + j + 1) * d];
                for (o, c) in out.iter_mut().zip(row) {
                    *o += w * c;
                }
            }
        }
        out
    }

    pub fn mul(&self, a: &Element, b: &Element) -> Result<Element> {
        if a.space != self.id || b.space != self.id {
            return Err(Error::AlgebraMismatch);
        }
        Ok(Element::from_raw(self.id, self.mul_coords(&a.coords, &b.coords)))
    }

    /// Left-to-right product `((a_1 a_2) a_3) ⋯ a_n`.
    pub fn product_chain(&self, elems: &[Element]) -> Result<Element> {
        let (first, rest) = elems.split_first().ok_or(Error::EmptyChain)?;
        if elems.iter().any(|e| e.space != self.id) {
            return Err(Error::AlgebraMismatch);
        }
        let mut acc = first.coords.clone();
        for e in rest {
            acc = self.mul_coords(&acc, &e.coords);
        }
        Ok(Element::from_raw(self.id, acc))
    }

    /// Coordinate-level chain product; `None` for an empty chain.
    pub fn chain_coords<'a, I>(&self, mut elems: I) -> Option<Vec<f64>>
    where
        I: Iterator<Item = &'a [f64]>,
    {
        let mut acc = elems.next()?.to_vec();
        for e in elems {
            acc = self.mul_coords(&acc, e);
        }
        Some(acc)
    }

    #[inline]
    pub fn norm_coords(&self, a: &[f64]) -> f64 {
        self.norm.eval(a)
    }

    pub fn norm(&self, a: &Element) -> f64 {
        self.norm.eval(&a.coords)
    }

    /// Largest `|((e_i e_j) e_k − e_i (e_j e_k))_l|` over all basis triples.
    /// Exact (integer arithmetic) when every structure constant is a small
    /// integer.
    pub fn associativity_residual(&self) -> f64 {
        let d = self.dim;
        let integral = self.structure.iter().all(|c| c.fract() == 0.0 && c.abs() <= 1e6);
        let c = |i: usize, j: usize, k: usize| self.structure[(i * d + j) * d + k];
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        if integral {
                            let mut lhs: i128 = 0;
                            let mut rhs: i128 = 0;
                            for m in 0..d {
                                lhs += c(i, j, m) as i128 * c(m, k, l) as i128;
                                rhs += c(j, k, m) as i128 * c(i, m, l) as i128;
                            }
                            worst = worst.max((lhs - rhs).unsigned_abs() as f64);
                        } else {
                            let mut lhs = 0.0;
                            let mut rhs = 0.0;
                            for m in 0..d {
                                lhs += c(i, j, m) * c(m, k, l);
                                rhs += c(j, k, m) * c(i, m, l);
                            }
                            worst = worst.max((lhs - rhs).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Verifies a declared matrix-unit realization. Returns whether the
    /// statistical submultiplicativity check may be skipped.
    fn check_embedding(&self) -> Result<bool, String> {
        let Some(MatrixEmbedding { size, units: Some(units) }) = &self.embedding else {
            return Ok(false);
        };
        if units.len() != self.dim {
            return Err(format!("{} matrix units for dim {}", units.len(), self.dim));
        }
        for (i, &(a, b)) in units.iter().enumerate() {
            if a >= *size || b >= *size {
                return Err("matrix unit out of range".into());
            }
            for (j, &(c, d)) in units.iter().enumerate() {
                for (k, &unit) in units.iter().enumerate() {
                    let expected = if b == c && unit == (a, d) { 1.0 } else { 0.0 };
                    if self.structure_const(i, j, k) != expected {
                        return Err("structure constants disagree with matrix units".into());
                    }
                }
            }
        }
        for (i, u) in units.iter().enumerate() {
            if units[..i].contains(u) {
                return Err("repeated matrix unit".into());
            }
        }
        Ok(self.norm == NormKind::Frobenius)
    }

    fn check_norm_positivity(&self) -> Result<(), String> {
        if self.norm_coords(&vec![0.0; self.dim]) != 0.0 {
            return Err("norm of zero is nonzero".into());
        }
        let mut rng = rng::stream_rng(VALIDATION_SEED, rng::stream::VALIDATION);
        for _ in 0..256 {
            let a: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            if !(self.norm_coords(&a) > 0.0) {
                return Err("norm vanishes on a nonzero element".into());
            }
        }
        Ok(())
    }

    fn check_submultiplicative(&self, samples: usize) -> Result<(), String> {
        let mut rng = rng::stream_rng(VALIDATION_SEED, rng::stream::VALIDATION + 100);
        for _ in 0..samples {
            let a: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let b: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let lhs = self.norm_coords(&self.mul_coords(&a, &b));
            let rhs = self.norm_coords(&a) * self.norm_coords(&b);
            if lhs > rhs * (1.0 + 1e-12) {
                return Err(format!("norm is not submultiplicative ({lhs} > {rhs})"));
            }
        }
        Ok(())
    }
}

/// Bimodule `X` over an algebra `A`, given by left and right action tensors.
#[derive(Clone, Debug)]
pub struct Bimodule {
    name: String,
    dim: usize,
    base: SpaceId,
    base_dim: usize,
    /// `e_i · x_p = Σ_q left[(i * dim + p) * dim + q] x_q`
    left: Vec<f64>,
    /// `x_p · e_i = Σ_q right[(p * base_dim + i) * dim + q] x_q`
    right: Vec<f64>,
    norm: NormKind,
    id: SpaceId,
}

impl Bimodule {
    pub fn new(
        name: impl Into<String>,
        base: &Algebra,
        dim: usize,
        left: Vec<f64>,
        right: Vec<f64>,
        norm: NormKind,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |msg: String| Error::InvalidBimodule(format!("{name}: {msg}"));
        let n = base.dim();
        if dim == 0 {
            return Err(invalid("dimension must be positive".into()));
        }
        if left.len() != n * dim * dim || right.len() != n * dim * dim {
            return Err(invalid("action tensors have the wrong size".into()));
        }
        if left.iter().chain(&right).any(|c| !c.is_finite()) {
            return Err(invalid("non-finite action coefficient".into()));
        }
        norm.validate(dim).map_err(invalid)?;

        let mut h = splitmix64(base.id().0 ^ 0xB1_30D0 ^ dim as u64);
        for c in left.iter().chain(&right) {
            h = splitmix64(h ^ c.to_bits());
        }
        h = norm.fingerprint(h);
        let module = Bimodule {
            name: name.clone(),
            dim,
            base: base.id(),
            base_dim: n,
            left,
            right,
            norm,
            id: SpaceId(h),
        };
        let residual = module.action_residual(base);
        if residual > ASSOC_TOL {
            return Err(invalid(format!("actions not associative (residual {residual:e})")));
        }
        module.check_bounded(base, 2_000).map_err(invalid)?;
        Ok(module)
    }

    /// The algebra as a bimodule over itself.
    pub fn regular(alg: &Algebra) -> Self {
        let d = alg.dim();
        let mut right = vec![0.0; d * d * d];
        for p in 0..d {
            for i in 0..d {
                for q in 0..d {
                    right[(p * d + i) * d + q] = alg.structure_const(p, i, q);
                }
            }
        }
        Bimodule::new(
            format!("{} (regular)", alg.name()),
            alg,
            d,
            alg.structure.clone(),
            right,
            alg.norm_kind().clone(),
        )
        .expect("regular bimodule of a validated algebra")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn base(&self) -> SpaceId {
        self.base
    }

    pub fn norm_kind(&self) -> &NormKind {
        &self.norm
    }

    pub fn element(&self, coords: Vec<f64>) -> Result<Element> {
        if coords.len() != self.dim {
            return Err(Error::AlgebraMismatch);
        }
        Ok(Element::from_raw(self.id, coords))
    }

    pub fn norm_coords(&self, x: &[f64]) -> f64 {
        self.norm.eval(x)
    }

    pub fn norm(&self, x: &Element) -> f64 {
        self.norm.eval(&x.coords)
    }

    pub fn left_coords(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (p, &xp) in x.iter().enumerate() {
                if xp == 0.0 {
                    continue;
                }
                let w = ai * xp;
                let row = &self.left[(i * d + p) * d..(i * d + p + 1) * d];
                for (o, c) in out.iter_mut().zip(row) {
                    *o += w * c;
                }
            }
        }
        out
    }

    pub fn right_coords(&self, x: &[f64], a: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let n = self.base_dim;
        let mut out = vec![0.0; d];
        for (p, &xp) in x.iter().enumerate() {
            if xp == 0.0 {
                continue;
            }
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let w = xp * ai;
                let row = &self.right[(p * n + i) * d..(p * n + i + 1) * d];
                for (o, c) in out.iter_mut().zip(row) {
                    *o += w * c;
                }
            }
        }
        out
    }

    pub fn act_left(&self, a: &Element, x: &Element) -> Result<Element> {
        if a.space != self.base || x.space != self.id {
            return Err(Error::AlgebraMismatch);
        }
        Ok(Element::from_raw(self.id, self.left_coords(&a.coords, &x.coords)))
    }

    pub fn act_right(&self, x: &Element, a: &Element) -> Result<Element> {
        if a.space != self.base || x.space != self.id {
            return Err(Error::AlgebraMismatch);
        }
        Ok(Element::from_raw(self.id, self.right_coords(&x.coords, &a.coords)))
    }

    /// Worst violation of `(ab)·x = a·(b·x)`, `x·(ab) = (x·a)·b` and
    /// `(a·x)·b = a·(x·b)` over basis triples.
    fn action_residual(&self, base: &Algebra) -> f64 {
        let n = base.dim();
        let mut worst = 0.0f64;
        let unit = |len: usize, i: usize| {
            let mut v = vec![0.0; len];
            v[i] = 1.0;
            v
        };
        let diff = |u: &[f64], v: &[f64]| {
            u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        for i in 0..n {
            let a = unit(n, i);
            for j in 0..n {
                let b = unit(n, j);
                let ab = base.mul_coords(&a, &b);
                for p in 0..self.dim {
                    let x = unit(self.dim, p);
                    let l1 = self.left_coords(&ab, &x);
                    let l2 = self.left_coords(&a, &self.left_coords(&b, &x));
                    let r1 = self.right_coords(&x, &ab);
                    let r2 = self.right_coords(&self.right_coords(&x, &a), &b);
                    let m1 = self.right_coords(&self.left_coords(&a, &x), &b);
                    let m2 = self.left_coords(&a, &self.right_coords(&x, &b));
                    worst = worst.max(diff(&l1, &l2)).max(diff(&r1, &r2)).max(diff(&m1, &m2));
                }
            }
        }
        worst
    }

    fn check_bounded(&self, base: &Algebra, samples: usize) -> Result<(), String> {
        let mut rng = rng::stream_rng(VALIDATION_SEED, rng::stream::VALIDATION + 200);
        for _ in 0..samples {
            let a: Vec<f64> = (0..base.dim()).map(|_| rng.sample(StandardNormal)).collect();
            let x: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let bound = base.norm_coords(&a) * self.norm_coords(&x) * (1.0 + 1e-12);
            if self.norm_coords(&self.left_coords(&a, &x)) > bound
                || self.norm_coords(&self.right_coords(&x, &a)) > bound
            {
                return Err("action is not bounded by the product of norms".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(alg: &Algebra, rows: &[&[f64]]) -> Element {
        alg.element(rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn one_by_one_matrices_are_scalars() {
        let m1 = Algebra::matrix(1).unwrap();
        assert_eq!(m1.dim(), 1);
        let a = m1.element(vec![3.0]).unwrap();
        let b = m1.element(vec![-2.5]).unwrap();
        assert_eq!(m1.mul(&a, &b).unwrap().coords(), &[-7.5]);
    }

    #[test]
    fn identity_of_m3_has_norm_sqrt3() {
        let m3 = Algebra::matrix(3).unwrap();
        assert_eq!(m3.dim(), 9);
        let id = m(&m3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!((m3.norm(&id) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn matrix_units_in_m2() {
        let m2 = Algebra::matrix(2).unwrap();
        let e12 = m(&m2, &[&[0.0, 1.0], &[0.0, 0.0]]);
        let e21 = m(&m2, &[&[0.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(m2.mul(&e12, &e21).unwrap().coords(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m2.mul(&e21, &e12).unwrap().coords(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn norms() {
        let m2 = Algebra::matrix(2).unwrap();
        assert_eq!(m2.norm(&m2.zero()), 0.0);
        assert_eq!(m2.norm(&m(&m2, &[&[3.0, 4.0], &[0.0, 0.0]])), 5.0);
        let r = Algebra::reals();
        assert_eq!(r.norm(&r.element(vec![-2.5]).unwrap()), 2.5);
    }

    #[test]
    fn mismatched_algebras_are_rejected() {
        let m2 = Algebra::matrix(2).unwrap();
        let r = Algebra::reals();
        let a = m2.basis(0);
        let b = r.basis(0);
        assert!(matches!(m2.mul(&a, &b), Err(Error::AlgebraMismatch)));
        assert!(matches!(m2.product_chain(&[]), Err(Error::EmptyChain)));
        assert!(matches!(a.add(&b), Err(Error::AlgebraMismatch)));
    }

    #[test]
    fn single_chain_is_identity() {
        let m2 = Algebra::matrix(2).unwrap();
        let a = m(&m2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(m2.product_chain(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn non_associative_structure_is_rejected() {
        // e0 e0 = e1, everything else zero except e1 e0 = e0: (e0 e0) e0 = e0 but e0 (e0 e0) = 0
        let mut c = vec![0.0; 8];
        c[1] = 1.0;
        c[(2) * 2] = 1.0;
        let err = Algebra::new("bad", vec!["a".into(), "b".into()], 2, c, NormKind::Frobenius, None);
        assert!(matches!(err, Err(Error::InvalidAlgebra(_))));
    }

    #[test]
    fn non_submultiplicative_norm_is_rejected() {
        // R with product 2xy under |.| has ‖1·1‖ = 2 > 1
        let err = Algebra::new("2R", vec!["1".into()], 1, vec![2.0], NormKind::Abs, None);
        assert!(matches!(err, Err(Error::InvalidAlgebra(msg)) if msg.contains("submultiplicative")));
    }

    #[test]
    fn abs_norm_needs_dim_one() {
        let err = Algebra::new(
            "x",
            vec!["a".into(), "b".into()],
            2,
            vec![0.0; 8],
            NormKind::Abs,
            None,
        );
        assert!(err.is_err());
    }

    #[test]
    fn unclosed_matrix_units_fail() {
        assert!(Algebra::from_matrix_units("bad", 2, vec![(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn loads_definition_file() {
        // dual numbers R[x]/(x^2) with the l1 norm
        let text = r#"
            name = "dual"
            dim = 2
            labels = ["1", "x"]
            structure = [[0, 0, 0, 1], [0, 1, 1, 1.0], [1, 0, 1, 1]]
            norm_kind = "weighted_l1"
            weights = [1.0, 1.0]
        "#;
        let alg = Algebra::from_toml_str(text).unwrap();
        assert_eq!(alg.labels(), &["1", "x"]);
        let a = alg.element(vec![2.0, 3.0]).unwrap();
        let b = alg.element(vec![1.0, -1.0]).unwrap();
        assert_eq!(alg.mul(&a, &b).unwrap().coords(), &[2.0, 1.0]);
    }

    #[test]
    fn file_with_matrix_units_is_exempt_and_checked() {
        let text = r#"
            dim = 2
            structure = [[0, 0, 0, 1], [0, 1, 1, 1], [1, 1, 1, 0]]
            norm_kind = "frobenius"
            matrix_embedding = 2
            matrix_units = [[0, 0], [0, 1]]
        "#;
        let alg = Algebra::from_toml_str(text).unwrap();
        assert_eq!(alg.embedding().unwrap().size, 2);
        let wrong = text.replace("[0, 1, 1, 1]", "[0, 1, 1, 2]");
        assert!(Algebra::from_toml_str(&wrong).is_err());
    }

    #[test]
    fn regular_bimodule_matches_product() {
        let m2 = Algebra::matrix(2).unwrap();
        let x = Bimodule::regular(&m2);
        let a = m(&m2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&m2, &[&[0.0, 1.0], &[-1.0, 2.0]]);
        let bx = x.element(b.coords().to_vec()).unwrap();
        assert_eq!(x.act_left(&a, &bx).unwrap().coords(), m2.mul(&a, &b).unwrap().coords());
        assert_eq!(x.act_right(&bx, &a).unwrap().coords(), m2.mul(&b, &a).unwrap().coords());
    }

    #[test]
    fn inconsistent_bimodule_is_rejected() {
        let r = Algebra::reals();
        // left action by 2x is not associative: (1·1)·x = 2x but 1·(1·x) = 4x
        let err = Bimodule::new("bad", &r, 1, vec![2.0], vec![1.0], NormKind::Abs);
        assert!(err.is_err());
    }

    fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, dim)
    }

    proptest! {
        #[test]
        fn chain_is_associative(a in coords(9), b in coords(9), c in coords(9)) {
            let m3 = Algebra::matrix(3).unwrap();
            let (a, b, c) = (m3.element(a).unwrap(), m3.element(b).unwrap(), m3.element(c).unwrap());
            let chain = m3.product_chain(&[a.clone(), b.clone(), c.clone()]).unwrap();
            let left = m3.mul(&m3.mul(&a, &b).unwrap(), &c).unwrap();
            let right = m3.mul(&a, &m3.mul(&b, &c).unwrap()).unwrap();
            for ((x, y), z) in chain.coords().iter().zip(left.coords()).zip(right.coords()) {
                prop_assert_eq!(x, y);
                prop_assert!((x - z).abs() <= 1e-12 * (1.0 + x.abs()) * 1e3);
            }
        }

        #[test]
        fn norm_is_homogeneous(a in coords(4), t in -100.0f64..100.0) {
            let m2 = Algebra::matrix(2).unwrap();
            let a = m2.element(a).unwrap();
            let lhs = m2.norm(&a.scale(t));
            let rhs = t.abs() * m2.norm(&a);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn frobenius_is_submultiplicative(a in coords(16), b in coords(16)) {
            let m4 = Algebra::matrix(4).unwrap();
            let (a, b) = (m4.element(a).unwrap(), m4.element(b).unwrap());
            let ab = m4.mul(&a, &b).unwrap();
            prop_assert!(m4.norm(&ab) <= m4.norm(&a) * m4.norm(&b) * (1.0 + 1e-12));
        }
    }
}
