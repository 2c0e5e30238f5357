//! Brute-force nearest additive map along one generator.
//!
//! On the integer multiples `t·g`, `t ∈ [−N, N]`, every additive map is
//! `t ↦ t·x₀`. The oracle finds the `x₀` minimizing the sup distance
//! `max_t ‖f(t·g) − t·x₀‖`, independently of the direct method.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::Element;
use crate::direct::{direct_limit, Schedule};
use crate::error::{Error, Result};
use crate::maps::{Mapping, Target};

pub const MIN_SAMPLES: u32 = 8;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const GOLDEN_ITERS: usize = 200;

/// Values `f(t·g)` for `t = −N, …, N`.
#[derive(Clone, Debug)]
pub struct SampledMap {
    generator: Element,
    n: u32,
    values: Vec<Vec<f64>>,
    codomain: Target,
}

impl SampledMap {
    pub fn sample<M: Mapping + ?Sized>(f: &M, generator: &Element, n: u32) -> Result<Self> {
        if generator.space() != f.domain().id() {
            return Err(Error::DomainMismatch);
        }
        let ts: Vec<i64> = (-(n as i64)..=n as i64).collect();
        let values: Vec<Vec<f64>> = ts.par_iter().map(|&t| f.apply(generator.scale(t as f64).coords())).collect();
        SampledMap::from_values(generator.clone(), n, values, f.codomain().clone())
    }

    pub fn from_values(generator: Element, n: u32, values: Vec<Vec<f64>>, codomain: Target) -> Result<Self> {
        if n < MIN_SAMPLES {
            return Err(Error::InvalidMap(format!("need N ≥ {MIN_SAMPLES}, got {n}")));
        }
        if values.len() != 2 * n as usize + 1 || values.iter().any(|v| v.len() != codomain.dim()) {
            return Err(Error::InvalidMap("sample table has the wrong shape".into()));
        }
        if values.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMap("non-finite sample value".into()));
        }
        Ok(SampledMap { generator, n, values, codomain })
    }

    pub fn generator(&self) -> &Element {
        &self.generator
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    fn t(&self, k: usize) -> f64 {
        k as f64 - self.n as f64
    }

    /// `max_t ‖f(t·g) − t·x‖`.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; x.len()];
        let mut worst = 0.0f64;
        for (k, y) in self.values.iter().enumerate() {
            let t = self.t(k);
            for ((b, yi), xi) in buf.iter_mut().zip(y).zip(x) {
                *b = yi - t * xi;
            }
            worst = worst.max(self.codomain.norm_coords(&buf));
        }
        worst
    }

    fn coord_distance(&self, i: usize, x: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, y)| (y[i] - self.t(k) * x).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleFit {
    pub generator_image: Vec<f64>,
    pub distance: f64,
    /// Final compass step: no single-coordinate move of this size improves
    /// the distance.
    pub resolution: f64,
}

fn golden_section(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..GOLDEN_ITERS {
        if hi - lo <= f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if g1 <= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - GOLDEN * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + GOLDEN * (hi - lo);
            g2 = g(x2);
        }
    }
    if g1 <= g2 {
        x1
    } else {
        x2
    }
}

/// Chebyshev-nearest `x₀`: golden section on each coordinate problem, then a
/// compass search on the joint objective.
pub fn nearest_additive_chebyshev(s: &SampledMap) -> OracleFit {
    let d = s.codomain.dim();
    let nf = s.n as f64;
    let first = &s.values[0];
    let last = &s.values[s.values.len() - 1];

    let mut x: Vec<f64> = (0..d)
        .into_par_iter()
        .map(|i| {
            let secant = (last[i] - first[i]) / (2.0 * nf);
            let g = |v: f64| s.coord_distance(i, v);
            let g0 = g(secant);
            if g0 == 0.0 {
                return secant;
            }
            // any minimizer x* has N|x* − secant| ≤ g(x*) + g(secant) ≤ 2 g(secant)
            let half = 2.0 * g0 / nf * (1.0 + 1e-12) + f64::EPSILON * (1.0 + secant.abs());
            golden_section(g, secant - half, secant + half)
        })
        .collect();

    let mut best = s.distance(&x);
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut step = 1e-3 * scale;
    let floor = f64::EPSILON * scale;
    loop {
        let mut improved = false;
        for i in 0..d {
            for dir in [1.0, -1.0] {
                let old = x[i];
                x[i] = old + dir * step;
                let v = s.distance(&x);
                if v < best {
                    best = v;
                    improved = true;
                } else {
                    x[i] = old;
                }
            }
        }
        if !improved {
            if step <= floor {
                break;
            }
            step *= 0.5;
        }
    }
    OracleFit { generator_image: x, distance: best, resolution: step }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossValidation {
    pub n: u32,
    pub oracle: OracleFit,
    pub limit_at_generator: Vec<f64>,
    pub gap: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Compares the oracle's `x₀` with the direct-method limit `h(g)`.
///
/// When `f` is within `eps` of an additive map, both `t ↦ t·x₀` and `h` stay
/// within `eps` of `f` at `t = N`, so `‖x₀ − h(g)‖ ≤ 2 eps / N`.
pub fn cross_validate<M: Mapping + ?Sized>(
    f: &M,
    generator: &Element,
    sched: &Schedule,
    n: u32,
    eps: f64,
) -> Result<CrossValidation> {
    let trace = direct_limit(f, generator, sched)?;
    let limit = match trace.limit.clone() {
        Some(l) => l,
        None => {
            return Err(Error::LimitDiverged { point: generator.coords().to_vec(), trace: Box::new(trace) })
        }
    };
    let oracle = nearest_additive_chebyshev(&SampledMap::sample(f, generator, n)?);
    let diff: Vec<f64> = oracle.generator_image.iter().zip(&limit).map(|(a, b)| a - b).collect();
    let gap = f.codomain().norm_coords(&diff);
    let bound = 2.0 * eps / n as f64;
    let slack = trace.residual_bound.unwrap_or(0.0) + oracle.resolution;
    Ok(CrossValidation {
        n,
        satisfied: gap <= bound + slack,
        oracle,
        limit_at_generator: limit,
        gap,
        bound,
    })
}
