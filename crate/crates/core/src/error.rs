use crate::direct::IterationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("elements belong to different spaces")]
    AlgebraMismatch,
    #[error("product of an empty chain")]
    EmptyChain,
    #[error("argument is not in the domain of the map")]
    DomainMismatch,
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("invalid bimodule: {0}")]
    InvalidBimodule(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("noise amplitude must be a finite nonnegative number, got {0}")]
    InvalidEps(f64),
    #[error("base map is not an exact {n}-ring homomorphism (defect {defect:e})")]
    NotHomomorphism { n: usize, defect: f64 },
    #[error("codomain must be an algebra for product defects")]
    CodomainNotAlgebra,
    #[error("codomain must be a bimodule over the domain for derivation defects")]
    CodomainNotModule,
    #[error("tuple length must be at least 2, got {0}")]
    InvalidArity(usize),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule sign does not match the growth exponent")]
    ScheduleMismatch,
    #[error("argument scale overflow at m = {m}")]
    ScaleOverflow { m: u64 },
    #[error("map returned a non-finite value at m = {m}")]
    NonFinite { m: u64 },
    #[error("direct-method limit diverged at {point:?}")]
    LimitDiverged {
        point: Vec<f64>,
        trace: Box<IterationTrace>,
    },
    #[error("unsupported exponent {0}")]
    UnsupportedExponent(f64),
    #[error("map is not additive on the grid (defect {0:e})")]
    NotAdditive(f64),
    #[error("map is not declared homogeneous")]
    NotHomogeneous,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
