//! Numerical laboratory for left and right iterated function systems of
//! holomorphic self-maps of the unit disc and the upper half-plane.
//!
//! All distances use the hyperbolic metric with density `1/(1-|z|^2)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod criteria;
pub mod error;
pub mod gallery;
pub mod geometry;
pub mod holomap;
pub mod ifs;
pub mod moebius;
pub mod report;
pub mod straighten;

pub use error::{Error, Result};
pub use geometry::{DiscPoint, HalfPlanePoint, HyperbolicBall};
pub use holomap::{DWKind, DWReport, MapExpr};
pub use ifs::{BackwardOrbit, GeneratorStream, LeftOrbitCursor, RightOrbitState, Side, StreamRule};
pub use moebius::{AutClass, AutKind, DomainTag, MoebiusMap};
pub use num_complex::Complex64;
