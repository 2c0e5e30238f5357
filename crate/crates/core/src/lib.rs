//! Numerical laboratory for approximate n-ring homomorphisms and n-ring
//! derivations between finite-dimensional normed algebras.
//!
//! The crate builds perturbed maps with controlled defects, recovers the
//! exact map hiding behind them with the direct-method limit
//! `h(a) = lim 2^-m f(2^m a)` (or `m^-s f(m^s a)`), and checks every
//! quantitative bound against a finite grid.

pub mod algebra;
pub mod counterexamples;
pub mod direct;
pub mod error;
pub mod maps;
pub mod oracle;
pub mod rng;
pub mod runner;
pub mod verify;

pub use algebra::{Algebra, Bimodule, Element, NormKind, SpaceId};
pub use direct::{
    build_limit_map, direct_limit, residual_bound, Growth, IterationTrace, Schedule,
    ScheduleKind, Verdict,
};
pub use error::{Error, Result};
pub use maps::{MapSpec, Mapping, Perturbation, Target};
pub use verify::{DefectReport, Grid};
