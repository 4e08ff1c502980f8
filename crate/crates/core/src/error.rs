use thiserror::Error;

/// Errors raised by mesh construction, assembly and the linear solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FemError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("element {element} is degenerate or inverted (Jacobian determinant {det:e})")]
    DegenerateElement { element: usize, det: f64 },

    #[error("vertex {vertex} lies on the boundary; a patch needs an interior vertex")]
    BoundaryVertex { vertex: usize },

    #[error("vertex {vertex} is touched by {valence} elements, expected {expected}")]
    IrregularValence {
        vertex: usize,
        valence: usize,
        expected: usize,
    },

    #[error("unknown boundary facet tag `{0}`")]
    UnknownFacetTag(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("iterative solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("point ({x}, {y}, {z}) is outside the mesh")]
    PointOutside { x: f64, y: f64, z: f64 },
}

pub type Result<T> = std::result::Result<T, FemError>;
