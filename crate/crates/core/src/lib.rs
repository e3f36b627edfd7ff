//! Chart-based calculus for f-harmonic maps between Riemannian manifolds.
//!
//! Every differential operator is evaluated exactly (to rounding) by
//! second-order jet arithmetic over user-supplied expressions. The numeric
//! core is generic over the scalar type; the aliases below fix it to `f64`,
//! which is what the classification layer and the command line use.

pub mod conformal;
mod error;
pub mod exprlang;
pub mod geometry;
pub mod linalg;
pub mod mapcalc;
mod scalar;
pub mod spin;
pub mod verifier;

pub use error::{Error, Result, Side};
pub use scalar::Scalar;

pub type Jet = exprlang::Jet2<f64>;
pub type Metric = geometry::MetricAtPoint<f64>;
pub type MapJetF64 = mapcalc::MapJet<f64>;
pub type Report = conformal::ConformalityReport<f64>;
pub type Fiber = conformal::FiberGeometry<f64>;
pub type Field = spin::SpinField<f64>;
pub type Mat = linalg::Matrix<f64>;
