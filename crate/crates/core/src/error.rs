use thiserror::Error;

/// Errors raised while building, assembling or solving a coupled problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("degenerate tetrahedron {tet} (signed volume {volume:e})")]
    DegenerateTet { tet: usize, volume: f64 },

    #[error("segment endpoint {point:?} lies outside the domain")]
    SegmentOutsideDomain { point: [f64; 3] },

    #[error("segment has zero length")]
    ZeroLengthSegment,

    #[error("segment interval [{start}, {end}] is not contained in any tetrahedron")]
    UncoveredInterval { start: f64, end: f64 },

    #[error("segments {first} and {second} overlap along a common line")]
    CollinearOverlap { first: usize, second: usize },

    #[error("arclength {s} outside [0, {length}]")]
    OutOfRange { s: f64, length: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("conflicting boundary data on DOF {dof}: {first} vs {second}")]
    ConflictingBoundary { dof: usize, first: f64, second: f64 },

    #[error("junction references missing endpoint DOF of subsegment {subsegment}")]
    MissingJunctionDof { subsegment: usize },

    #[error("singular matrix: zero pivot at column {column}")]
    Singular { column: usize },

    #[error("dense dimension {dim} exceeds cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("non-descent direction at iteration {iteration} (curvature {curvature:e})")]
    NonDescent { iteration: usize, curvature: f64 },

    #[error("no convergence after {iterations} iterations (relative gradient {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("{0} is undefined")]
    Undefined(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
