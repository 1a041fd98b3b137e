use thiserror::Error;

/// Errors raised across the lattice, solver, analysis and market layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("horizon must be positive: t0 = {t0}, T = {horizon}")]
    NonPositiveHorizon { t0: f64, horizon: f64 },
    #[error("time grid needs at least one step")]
    ZeroSteps,
    #[error("step {step} out of range (last step {last})")]
    StepOutOfRange { step: usize, last: usize },
    #[error("expected {expected} node values at step {step}, got {got}")]
    ShapeMismatch {
        step: usize,
        expected: usize,
        got: usize,
    },
    #[error("Lipschitz constant must be non-negative, got {0}")]
    NegativeMu(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("mu * dt = {0} >= 1: implicit step is not a contraction")]
    ContractionViolation(f64),
    #[error("Picard iteration did not converge at step {step}, node {node} (residual {residual:e})")]
    PicardDivergence {
        step: usize,
        node: usize,
        residual: f64,
    },
    #[error("steps out of order: s = {s}, t = {t}")]
    BadStepOrder { s: usize, t: usize },
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("mu * (sqrt(dt) + dt) = {0} > 1: one-step scheme is not monotone")]
    SchemeNotMonotone(f64),
    #[error("process is not a supermartingale at step {step}, node {node} (increment {increment:e})")]
    NotSupermartingale {
        step: usize,
        node: usize,
        increment: f64,
    },
    #[error("representation bound violated at step {step}, node {node} by {excess:e}")]
    BoundViolated {
        step: usize,
        node: usize,
        excess: f64,
    },
    #[error("domination violated by probe at t = {t}, y = {y}, z = {z} (increment {increment:e})")]
    DominationViolated {
        t: f64,
        y: f64,
        z: f64,
        increment: f64,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("option chain has no rows")]
    EmptyChain,
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
