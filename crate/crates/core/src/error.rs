use thiserror::Error;

/// Errors raised across the jet engine, curvature calculus, models and harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular argument: {0} vanishes at the base point")]
    SingularArgument(&'static str),
    #[error("division by a jet with zero constant term")]
    DivisionByZeroJet,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("derivative order {requested} exceeds retained order {order}")]
    OrderExceeded { requested: usize, order: usize },
    #[error("jets from incompatible contexts ({0})")]
    ContextMismatch(String),
    #[error("newton iteration did not converge after {0} steps")]
    NonConvergence(usize),
    #[error("degenerate derivative in implicit solve")]
    DegenerateDerivative,
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("singular metric: {0}")]
    SingularMetric(String),
    #[error("point outside chart overlap: {0}")]
    OverlapViolation(String),
    #[error("quadrature tolerance not met: change {change:.3e} at order {order}")]
    Quadrature { change: f64, order: usize },
    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),
    #[error("stratum set is empty")]
    EmptyStratum,
    #[error("invalid window parameter delta={delta}: must lie in (0, {bound})")]
    InvalidDelta { delta: f64, bound: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
