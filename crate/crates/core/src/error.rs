use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires one-dimensional measures, got dimension {0}")]
    NotOneDimensional(usize),

    #[error("measure has no atoms with positive weight")]
    EmptyMeasure,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("measures are not in convex order")]
    NotInConvexOrder,

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("solver stopped after {iterations} iterations without certificate (gap {gap:e})")]
    NonCertified { iterations: usize, gap: f64 },

    #[error("problem has {vars} variables, exact solver limit is {limit}")]
    ScaleExceeded { vars: usize, limit: usize },

    #[error(
        "point lies outside the relative interior of the row support; no martingale projection"
    )]
    BoundaryProjection,

    #[error("chain link {link}: {source}")]
    Link {
        link: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips [`Error::Link`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Link { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
