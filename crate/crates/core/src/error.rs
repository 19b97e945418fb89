use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point id {0}")]
    UnknownPoint(usize),
    #[error("center set is empty")]
    EmptyCenterSet,
    #[error("fractional solution carries total mass {total}, at least 1 is required")]
    InsufficientMass { total: f64 },
    #[error("metric is degenerate: {0}")]
    DegenerateMetric(String),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("point has dimension {found}, registry expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("instance needs at least {needed} distinct points, found {found}")]
    TooFewDistinct { needed: usize, found: usize },
    #[error("invalid weight {0}; weights must be finite and positive")]
    InvalidWeight(f64),
    #[error("exhaustive search needs {subsets} subsets, budget is {budget}; use local search")]
    BudgetExceeded { subsets: u128, budget: u64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("projection could not bracket the dual variable (dimension {dim}, k {k})")]
    Bracketing { dim: usize, k: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed instance file, line {line}: {msg}")]
    InstanceFormat { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
