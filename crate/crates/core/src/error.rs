use thiserror::Error;

/// Errors raised by the geometry, imaging and optimization pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spline degree {degree} needs at least {required} control points, got {found}")]
    TooFewControls {
        degree: usize,
        required: usize,
        found: usize,
    },

    #[error("basis index {index} out of range (valid: {lo}..={hi})")]
    IndexOutOfRange { index: isize, lo: isize, hi: isize },

    #[error("parameter {value} outside knot span [{lo}, {hi}]")]
    ParameterOutOfSpan { value: f64, lo: f64, hi: f64 },

    #[error("knot vector is invalid: {0}")]
    InvalidKnots(String),

    #[error("sample parameters must be strictly increasing in [0, 1]")]
    NonIncreasingParameters,

    #[error("a polygon needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("boundary polyline intersects itself (segments {0} and {1})")]
    SelfIntersection(usize, usize),

    #[error("boundary has coincident samples ({0} and {1})")]
    DuplicatePoint(usize, usize),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("triangulation failed: {0}")]
    Triangulation(String),

    #[error("refinement area tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
