use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {requested} not supported (max {max})")]
    UnsupportedOrder { requested: usize, max: usize },

    #[error("level-set gradient vanishes at ({x}, {y}, {z})")]
    SingularPoint { x: f64, y: f64, z: f64 },

    #[error("projection onto surface did not converge after {iterations} iterations (|psi| = {residual:e})")]
    ProjectionFailed { iterations: usize, residual: f64 },

    #[error("arithmetic domain error: {0}")]
    ArithmeticDomain(&'static str),

    #[error("quadrature of exactness {requested} not available (max {max})")]
    UnsupportedQuadrature { requested: usize, max: usize },

    #[error("non-manifold mesh: {0}")]
    NonManifold(String),

    #[error("inverted or degenerate element {element} (area element {jacobian:e})")]
    InvertedElement { element: usize, jacobian: f64 },

    #[error("edge orientation mismatch on edge {edge}")]
    OrientationMismatch { edge: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history_tail: Vec<f64>,
    },

    #[error("dense oracle limited to {max} unknowns, got {actual}")]
    SizeExceeded { max: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
