//! The two counterexamples: a nilpotent algebra on which every linear map is
//! a 4-ring derivation, and a map `ℝ → M₃(ℝ)` that satisfies linear-growth
//! hypotheses yet has no nearby n-ring homomorphism.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{Algebra, Element};
use crate::direct::{direct_limit, iterate_at, Schedule, Verdict, DYADIC_GROWTH_CAP};
use crate::error::{Error, Result};
use crate::maps::{der_defect, der_defect_coords, MapSpec, Mapping, Perturbation, Target};
use crate::oracle::{nearest_additive_chebyshev, OracleFit, SampledMap};
use crate::rng::{stream, stream_rng};
use crate::verify::{cauchy_ratio, hom_ratio, sup_over, DefectReport, Grid, IDENTITY_TOL};

const RANK_TOL: f64 = 1e-10;
const TUPLES_PER_TRIAL: usize = 16;

/// Strictly upper-triangular 4×4 matrices, basis `e12, e13, e14, e23, e24, e34`.
pub fn build_nilpotent_algebra() -> Algebra {
    Algebra::from_matrix_units("UT4", 4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
        .expect("strictly upper-triangular units are closed")
}

/// Dimension of the span of all `k`-fold products of basis elements.
pub fn power_ideal_dim(alg: &Algebra, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArity(0));
    }
    let basis = alg.basis_elements();
    let mut span: Vec<Vec<f64>> = basis.iter().map(|e| e.coords().to_vec()).collect();
    for _ in 1..k {
        let products: Vec<Vec<f64>> = span
            .iter()
            .flat_map(|s| basis.iter().map(move |e| alg.mul_coords(s, e.coords())))
            .collect();
        span = orthonormal_span(&products, alg.dim());
        if span.is_empty() {
            break;
        }
    }
    Ok(orthonormal_span(&span, alg.dim()).len())
}

fn orthonormal_span(vectors: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c][r]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested u");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > RANK_TOL)
        .map(|(i, _)| u.column(i).iter().copied().collect())
        .collect()
}

/// A basis-supported map `e_source ↦ e_target` with a pair whose 2-fold
/// Leibniz defect is large.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivationWitness {
    pub source: String,
    pub target: String,
    pub tuple: Vec<String>,
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NilpotentReport {
    pub four_fold: DefectReport,
    pub two_fold_witness: DerivationWitness,
}

fn unit_map(alg: &Arc<Algebra>, source: usize, target: usize) -> MapSpec {
    let d = alg.dim();
    let mut m = vec![0.0; d * d];
    m[target * d + source] = 1.0;
    MapSpec::linear(alg.clone(), Target::Algebra(alg.clone()), m).expect("square matrix")
}

/// First `e_i ↦ e_j` map and basis pair with 2-fold Leibniz defect above 0.1.
pub fn two_fold_witness(alg: &Arc<Algebra>) -> Option<DerivationWitness> {
    let d = alg.dim();
    let basis = alg.basis_elements();
    let labels = alg.labels();
    for source in 0..d {
        for target in 0..d {
            let f = unit_map(alg, source, target);
            for a in 0..d {
                for b in 0..d {
                    let defect = der_defect(&f, &[basis[a].clone(), basis[b].clone()]).ok()?;
                    if defect > 0.1 {
                        return Some(DerivationWitness {
                            source: labels[source].clone(),
                            target: labels[target].clone(),
                            tuple: vec![labels[a].clone(), labels[b].clone()],
                            defect,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Sup of the 4-fold Leibniz defect over `trials` random linear maps on the
/// nilpotent algebra, each tested on 16 random 4-tuples, plus a 2-fold
/// witness showing the converse fails.
pub fn every_linear_is_4derivation(trials: usize, seed: u64) -> NilpotentReport {
    let alg = Arc::new(build_nilpotent_algebra());
    let d = alg.dim();
    let mut rng = stream_rng(seed, stream::TRIALS);
    let cases: Vec<(Vec<f64>, Vec<Vec<Vec<f64>>>)> = (0..trials)
        .map(|_| {
            let m: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
            let tuples = (0..TUPLES_PER_TRIAL)
                .map(|_| (0..4).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect())
                .collect();
            (m, tuples)
        })
        .collect();
    let sup = sup_over(&cases, |(m, tuples)| {
        let f = MapSpec::linear(alg.clone(), Target::Algebra(alg.clone()), m.clone()).expect("square");
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        for t in tuples {
            let refs: Vec<&[f64]> = t.iter().map(|v| v.as_slice()).collect();
            let v = der_defect_coords(&f, &refs).expect("regular codomain");
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, t.clone()));
            }
        }
        best
    });
    let mut four_fold = DefectReport::new("nilpotent_four_fold_leibniz", sup, Some(0.0), IDENTITY_TOL);
    four_fold.n = Some(4);
    NilpotentReport {
        four_fold,
        two_fold_witness: two_fold_witness(&alg).expect("UT4 has a non-derivation unit map"),
    }
}

/// `f: ℝ → M₃(ℝ)` with `φ(x)` in entry (2,1) and zeros elsewhere.
pub fn build_luminet_map() -> MapSpec {
    let m3 = Arc::new(Algebra::matrix(3).expect("M3"));
    MapSpec::zero(Arc::new(Algebra::reals()), Target::Algebra(m3))
        .with_perturbation(Perturbation::LogMap { slot: 3 })
        .expect("slot 3 is entry (2,1)")
        .labeled("luminet")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceProfile {
    /// `(m, ‖h_m(1)‖)` for `m = 0, …, m_max`.
    pub rows: Vec<(u64, f64)>,
    pub verdict: Verdict,
}

/// Dyadic iterates of the Luminet map at `1`, together with the direct
/// method's verdict.
pub fn divergence_profile(m_max: u64) -> Result<DivergenceProfile> {
    if m_max > DYADIC_GROWTH_CAP {
        return Err(Error::ScaleOverflow { m: m_max });
    }
    let f = build_luminet_map();
    let one = f.domain().basis(0);
    let sched = Schedule::dyadic(m_max.max(1), 1e-9)?;
    let rows = (0..=m_max)
        .map(|m| {
            let v = iterate_at(&f, one.coords(), &sched, m)?;
            Ok((m, f.codomain().norm_coords(&v)))
        })
        .collect::<Result<Vec<_>>>()?;
    let full = Schedule::dyadic(DYADIC_GROWTH_CAP, 1e-9)?;
    let verdict = direct_limit(&f, &one, &full)?.verdict;
    Ok(DivergenceProfile { rows, verdict })
}

/// Empirical premise constants of the Luminet map: the Cauchy ratio with
/// weight `|a| + |b|` and the `n`-fold product ratio with weight `Π|a_i|²`.
/// No bound is asserted.
pub fn premise_report(grid: &Grid, n: usize) -> Result<(DefectReport, DefectReport)> {
    let f = build_luminet_map();
    let c = cauchy_ratio(&f, 1.0, None, grid)?;
    let h = hom_ratio(&f, 2.0, n, None, grid)?;
    Ok((c, h))
}

/// `sup_a ‖f(a) − a·h_m(1)‖ / |a|` over the grid for each `m`: the distance
/// from `f` to the linear candidate the direct method produces after `m`
/// steps, in the scale of the linear-growth hypothesis.
pub fn candidate_gap_profile(ms: &[u64], grid: &Grid) -> Result<Vec<(u64, f64)>> {
    let f = build_luminet_map();
    let sched = Schedule::dyadic(DYADIC_GROWTH_CAP, 1e-9)?;
    let one = [1.0];
    ms.iter()
        .map(|&m| {
            let slope = iterate_at(&f, &one, &sched, m)?;
            let worst = grid
                .points()
                .par_iter()
                .filter_map(|a| {
                    let x = a.coords()[0];
                    (x != 0.0).then(|| {
                        let fa = f.apply(&[x]);
                        let diff: Vec<f64> = fa.iter().zip(&slope).map(|(y, s)| y - x * s).collect();
                        f.codomain().norm_coords(&diff) / x.abs()
                    })
                })
                .reduce(|| 0.0, f64::max);
            Ok((m, worst))
        })
        .collect()
}

/// Chebyshev distance from the Luminet map to the nearest additive map on
/// `t ∈ [−n, n]`.
pub fn luminet_oracle_distance(n: u32) -> Result<OracleFit> {
    let f = build_luminet_map();
    let one: Element = f.domain().basis(0);
    Ok(nearest_additive_chebyshev(&SampledMap::sample(&f, &one, n)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    use crate::maps::log_map_phi;

    /// Enumerates every chain of `k` basis indices and counts the distinct
    /// nonzero products; matrix units multiply to units or zero, so this is
    /// the dimension of the span.
    fn chain_oracle(alg: &Algebra, k: usize) -> usize {
        let d = alg.dim();
        let mut seen = std::collections::BTreeSet::new();
        let mut idx = vec![0usize; k];
        loop {
            let chain: Vec<Element> = idx.iter().map(|&i| alg.basis(i)).collect();
            let p = alg.product_chain(&chain).unwrap();
            if let Some(pos) = p.coords().iter().position(|c| *c != 0.0) {
                seen.insert(pos);
            }
            let mut carry = true;
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < d {
                    carry = false;
                    break;
                }
                *slot = 0;
            }
            if carry {
                break;
            }
        }
        seen.len()
    }

    #[test]
    fn unit_products() {
        let a = build_nilpotent_algebra();
        let e = |l: &str| a.basis(a.labels().iter().position(|x| x == l).unwrap());
        assert_eq!(a.mul(&e("e12"), &e("e23")).unwrap(), e("e13"));
        assert_eq!(a.product_chain(&[e("e12"), e("e23"), e("e34")]).unwrap(), e("e14"));
    }

    #[test]
    fn power_ideals_match_enumeration() {
        let a = build_nilpotent_algebra();
        let dims: Vec<usize> = (1..=4).map(|k| power_ideal_dim(&a, k).unwrap()).collect();
        assert_eq!(dims, vec![6, 3, 1, 0]);
        for k in 1..=4 {
            assert_eq!(dims[k - 1], chain_oracle(&a, k));
        }
        assert!(dims.windows(2).all(|w| w[1] <= w[0]));
        assert!(power_ideal_dim(&a, 0).is_err());
    }

    #[test]
    fn power_ideals_of_full_matrices_do_not_shrink() {
        let m2 = Algebra::matrix(2).unwrap();
        assert_eq!(power_ideal_dim(&m2, 5).unwrap(), 4);
    }

    #[test]
    fn zero_map_is_a_derivation() {
        let a = Arc::new(build_nilpotent_algebra());
        let z = MapSpec::zero(a.clone(), Target::Algebra(a.clone()));
        let t: Vec<Element> = (0..4).map(|i| a.basis(i)).collect();
        assert_eq!(der_defect(&z, &t).unwrap(), 0.0);
    }

    #[test]
    fn random_linear_maps_are_4_derivations() {
        let r = every_linear_is_4derivation(100, 7);
        assert!(r.four_fold.satisfied);
        assert!(r.four_fold.sup_value <= 1e-12);
        assert_eq!(r.four_fold.samples, 100);
        assert!(r.two_fold_witness.defect > 0.1);
    }

    #[test]
    fn the_suggested_unit_map_is_not_a_witness() {
        let a = Arc::new(build_nilpotent_algebra());
        let f = unit_map(&a, 0, 5);
        let d = der_defect(&f, &[a.basis(0), a.basis(3)]).unwrap();
        assert_eq!(d, 0.0);
        let w = two_fold_witness(&a).unwrap();
        assert_eq!(w.source, "e12");
        assert_eq!(w.defect, 1.0);
    }

    #[test]
    fn luminet_values() {
        let f = build_luminet_map();
        assert!(f.apply(&[0.5]).iter().all(|c| *c == 0.0));
        assert!((f.apply(&[E])[3] - E).abs() < 1e-15);
        assert!((f.apply(&[-2.0])[3] + 2.0 * LN_2).abs() < 1e-15);
        assert_eq!(log_map_phi(1.0), 0.0);
        assert_eq!(log_map_phi(-1.0), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn divergence_profile_is_linear_in_m() {
        let p = divergence_profile(50).unwrap();
        assert!(matches!(p.verdict, Verdict::Diverged { .. }));
        for &(m, v) in &p.rows {
            assert!((v - m as f64 * LN_2).abs() <= 1e-9);
        }
        assert!((p.rows[1].1 - 0.6931).abs() < 1e-4);
        assert!((p.rows[10].1 - 6.9315).abs() < 1e-4);
        for m in 1..=25 {
            assert!((p.rows[2 * m].1 / p.rows[m].1 - 2.0).abs() < 1e-9);
        }
        assert!(divergence_profile(61).is_err());
    }

    #[test]
    fn premise_examples() {
        let r = Arc::new(Algebra::reals());
        let pts = |v: &[f64]| v.iter().map(|x| r.element(vec![*x]).unwrap()).collect::<Vec<_>>();

        let g = Grid::new(pts(&[1.0]), "a = b = 1", 0).unwrap();
        let (c, _) = premise_report(&g, 2).unwrap();
        assert!((c.sup_value - LN_2).abs() < 1e-15);

        let g = Grid::new(pts(&[2.0]), "a = 2", 0).unwrap();
        let (_, h) = premise_report(&g, 2).unwrap();
        assert!((h.sup_value - 4f64.ln() / 4.0).abs() < 1e-15);

        let g = Grid::new(pts(&[0.25]), "a = 0.25", 0).unwrap();
        let (c, h) = premise_report(&g, 2).unwrap();
        assert_eq!((c.sup_value, h.sup_value), (0.0, 0.0));
    }

    #[test]
    fn candidate_gap_grows_with_m() {
        let r = Algebra::reals();
        let g = Grid::standard(&r, 32.0, 1);
        let gaps = candidate_gap_profile(&[5, 10, 20, 40], &g).unwrap();
        assert!(gaps.windows(2).all(|w| w[1].1 > w[0].1));
        assert!(gaps[3].1 >= 40.0 * LN_2 - 1e-9);
    }

    #[test]
    fn oracle_distance_grows() {
        let a = luminet_oracle_distance(128).unwrap().distance;
        let b = luminet_oracle_distance(512).unwrap().distance;
        assert!(b >= 1.5 * a);
    }
}
