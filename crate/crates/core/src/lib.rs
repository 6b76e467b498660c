//! Light rays of a conformal spacetime, numerically.
//!
//! The crate integrates null geodesics of Lorentzian metrics given in a
//! single coordinate chart, propagates Jacobi fields along them, builds the
//! chart of the space of light rays over a time slice, and evaluates the
//! canonical contact structure on that space through Jacobi classes.

pub mod contact;
pub mod error;
pub mod expr;
pub mod geodesics;
pub mod jacobi;
pub mod lightrays;
pub mod numeric;
pub mod spacetime;

pub use error::{DomainViolation, Error, Result};
pub use expr::Expr;
pub use geodesics::{NullGeodesic, Termination};
pub use jacobi::{JacobiClass, JacobiField, JacobiInit};
pub use lightrays::{CauchyChart, LightRay, RayCoords};
pub use spacetime::{MetricField, SpacetimeModel};

/// Column vector of chart components.
pub type Vector = nalgebra::DVector<f64>;
/// Dense square matrix (metric components, linear maps on a tangent space).
pub type Matrix = nalgebra::DMatrix<f64>;

/// Default numerical parameters.
pub mod defaults {
    /// Step of the central differences used for metric derivatives.
    pub const H_FD: f64 = 1e-5;
    /// Radius around excluded points that counts as the puncture.
    pub const EPS_EXCL: f64 = 1e-9;
    /// Relative null tolerance `|g(v,v)| ≤ TOL_NULL·‖v‖²` on inputs.
    pub const TOL_NULL: f64 = 1e-10;
    /// Allowed null drift along an integrated geodesic, relative to `‖v(0)‖²`.
    pub const TOL_NULL_DRIFT: f64 = 1e-8;
    /// Integrator steps per unit affine parameter.
    pub const STEPS_PER_UNIT: usize = 800;
    /// Pregeodesic residual accepted by the reparametrization.
    pub const TOL_PRE: f64 = 1e-6;
    /// Geodesic residual expected after reparametrization.
    pub const TOL_GEO: f64 = 1e-6;
    /// Normalization tolerance for `g(v,T) = -1`.
    pub const TOL_NORMALIZED: f64 = 1e-10;
    /// Minimum singular value of a contact gram for nondegeneracy.
    pub const TOL_CONTACT: f64 = 1e-6;
    /// Step for tangents of curves of rays.
    pub const DS_CHART: f64 = 1e-3;
}
