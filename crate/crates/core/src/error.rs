use thiserror::Error;

/// Why a point was rejected by a model's chart domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainViolation {
    /// Outside the axis-aligned coordinate box.
    OutsideBox,
    /// Inside the box but outside the region predicate (e.g. the open ball).
    OutsideRegion,
    /// Within the exclusion radius of an excluded point.
    Excluded { index: usize },
    /// Wrong number of coordinates.
    Dimension,
    /// Some coordinate is NaN or infinite.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} is outside the chart domain ({reason:?})")]
    OutOfDomain {
        point: Vec<f64>,
        reason: DomainViolation,
    },

    #[error("metric at {point:?} is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { point: Vec<f64>, asymmetry: f64 },

    #[error("metric at {point:?} has {negative} negative eigenvalues, expected exactly one")]
    Signature { point: Vec<f64>, negative: usize },

    #[error("time field at {point:?} is not future timelike")]
    BadTimeField { point: Vec<f64> },

    #[error("vector is not null: |g(v,v)| = {norm:e} exceeds {tolerance:e}")]
    NotNull { norm: f64, tolerance: f64 },

    #[error("vector is not future directed: g(v,T) = {pairing}")]
    NotFuture { pairing: f64 },

    #[error("curve is not a pregeodesic: residual {residual:e} exceeds {tolerance:e}")]
    NotPregeodesic { residual: f64, tolerance: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("geodesic velocity is not normalized: g(v,T) + 1 = {residual:e}")]
    NotNormalized { residual: f64 },

    #[error("Jacobi data is not a light-ray field: pairing slope {slope:e} exceeds {tolerance:e}")]
    NotLightRayField { slope: f64, tolerance: f64 },

    #[error("objects are based at different points")]
    BaseMismatch,

    #[error("slice x0 = {c0} is not spacelike at {point:?}")]
    NotSpacelike { c0: f64, point: Vec<f64> },

    #[error("slice x0 = {c0} does not lie inside the chart box")]
    SliceOutsideBox { c0: f64 },

    #[error("geodesic does not cross the slice x0 = {c0} inside the chart")]
    NoCrossing { c0: f64 },

    #[error("geodesic crosses the slice x0 = {c0} {count} times")]
    MultipleCrossings { c0: f64, count: usize },

    #[error("integration stopped at t = {reached} before reaching t = {requested}")]
    Truncated { reached: f64, requested: f64 },

    #[error("expression error at byte {position}: {message}")]
    Expression { position: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
