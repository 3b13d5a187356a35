use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("measure has no diffuse part")]
    EmptyDiffusePart,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("quantile plan infeasible at k={k}: {reason}")]
    Infeasible { k: usize, reason: String },
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),
    #[error("k={k} is below the construction threshold ({reason})")]
    KTooSmall { k: usize, reason: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("word index {index} out of range for arity {arity}")]
    IndexOutOfRange { index: usize, arity: usize },
    #[error("orbit is a single point")]
    SingletonOrbit,
    #[error("eps={eps} exceeds what the orbit path reaches")]
    EpsTooLarge { eps: f64 },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("statistic must be positive, got {0}")]
    NonpositiveStatistic(f64),
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error("no Monte Carlo hits in {trials} trials")]
    ZeroHits { trials: usize },
    #[error("packing premise failed at eps={eps}")]
    PackingPremiseUnverified { eps: f64 },
    #[error("map is not injective on the spectrum")]
    NonInjective,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
