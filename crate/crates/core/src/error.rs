use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring distribution: {0}")]
    InvalidDistribution(String),

    #[error("offspring law is not critical: mean {mean} differs from 1")]
    NotCritical { mean: f64 },

    #[error("offspring law with p(1) = 1 is degenerate")]
    DegenerateOffspring,

    #[error("malformed forest: {0}")]
    MalformedForest(String),

    #[error("malformed causal triangulation: {0}")]
    MalformedTriangulation(String),

    #[error("{what} = {value} out of range (0..={max})")]
    OutOfRange { what: &'static str, value: usize, max: usize },

    #[error("expected a {expected} path, got a {found} path")]
    KindMismatch { expected: &'static str, found: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("propagator is singular at l1 = 0; use the Gamma law for a zero start")]
    ZeroInitialLength,

    #[error("unstable grid: {0}")]
    UnstableGrid(String),

    #[error("empty sample")]
    EmptySample,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
