use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DgdError {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("element {0} is out of range")]
    InvalidElement(usize),

    #[error("stencil for element {element} reached only {reached} elements, degree needs {needed}")]
    StencilTooSmall {
        element: usize,
        reached: usize,
        needed: usize,
    },

    #[error("centroid Vandermonde of element {element} is rank deficient (sigma_min/sigma_max = {ratio:e})")]
    RankDeficient { element: usize, ratio: f64 },

    #[error("unsupported degree {degree} for {what}")]
    UnsupportedDegree { degree: usize, what: &'static str },

    #[error("SBP construction failed: {0}")]
    SbpConstruction(String),

    #[error("degenerate element {0} (zero measure)")]
    DegenerateElement(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("nonphysical state at element {element}, node {node}: rho = {rho:e}, p = {pressure:e}")]
    Nonphysical {
        element: usize,
        node: usize,
        rho: f64,
        pressure: f64,
    },

    #[error("inadmissible entropy variables (last component {0:e} must be negative)")]
    InadmissibleEntropyVars(f64),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("Newton did not converge after {iterations} iterations (residual history {history:?})")]
    NewtonDiverged {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("Riemann solver failed: {0}")]
    Riemann(String),
}

pub type Result<T> = std::result::Result<T, DgdError>;
