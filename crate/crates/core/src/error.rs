use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate level-set gradient |grad phi| = {norm:e} at {point:?}")]
    DegenerateGradient { point: [f64; 3], norm: f64 },

    #[error("point {point:?} is off the surface at t = {t}: |phi| = {residual:e} exceeds tube tolerance")]
    OffSurface { point: [f64; 3], t: f64, residual: f64 },

    #[error("icosphere subdivision level {0} exceeds the supported maximum of 8")]
    TooManySubdivisions(u32),

    #[error("degenerate triangle {tri}: area {area:e}")]
    DegenerateTriangle { tri: usize, area: f64 },

    #[error("mesh is not closed: edge ({0}, {1}) is used by {2} triangle(s), expected 2")]
    NotClosed(usize, usize, usize),

    #[error("mesh is inconsistently oriented at triangle {0}")]
    Orientation(usize),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("unsupported BDF order {0}: supported orders are 1..=6 (BDF is unstable for k > 6)")]
    UnsupportedOrder(usize),

    #[error("unsupported quadrature order {0}: supported degrees are 1..=5")]
    QuadratureOrder(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("starting values for order {0} need an exact solution")]
    MissingExactSolution(usize),

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("blow-up at step {step} (t = {t}): max |u| = {max_abs:e} exceeds guard {limit:e}")]
    BlowUp { step: usize, t: f64, max_abs: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
