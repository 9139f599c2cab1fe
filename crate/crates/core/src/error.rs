use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("path {path} references unknown arc {arc}")]
    UnknownArc { path: usize, arc: String },

    #[error("path {path} is not connected from its origin to its destination")]
    DisconnectedPath { path: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative demand {0}")]
    NegativeDemand(f64),

    #[error("enumeration exceeded {0} paths; supply explicit paths")]
    TooManyPaths(usize),

    #[error("capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scenario set is empty")]
    EmptyScenarioSet,

    #[error("operator produced a non-finite value at iteration {0}")]
    NonFinite(usize),

    #[error("complementarity violated on paths {paths:?}")]
    Complementarity { paths: Vec<usize> },

    #[error("active-set system is singular; equilibrium is not strongly regular")]
    SingularActiveSet,

    #[error("{size} degenerate paths exceed the enumeration cap of {cap}")]
    DegenerateSetTooLarge { size: usize, cap: usize },

    #[error("no sign pattern of the degenerate set is consistent")]
    NoConsistentPattern,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
