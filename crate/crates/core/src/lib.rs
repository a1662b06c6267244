//! Boundary-element simulation of patch-potential heating in RF ion traps.
//!
//! The pipeline runs geometry → discretization → Dirichlet solves →
//! pseudopotential modes → per-patch heating. Every numerical type is
//! generic over [`Real`]; the aliases below fix it to `f64`.

pub mod constants;
pub mod electrostatics;
pub mod error;
pub mod geometry;
pub mod heating;
pub mod pipeline;
pub mod scalar;
pub mod studies;
pub mod trapdynamics;
pub mod validation;
pub mod vec3;

pub use error::{Result, TrapError};
pub use scalar::Real;
pub use vec3::Vec3;

pub type Point = vec3::Vec3<f64>;
pub type TrapGeometry = geometry::TrapGeometry<f64>;
pub type PatchSet = geometry::PatchSet<f64>;
pub type TriangleMesh = geometry::TriangleMesh<f64>;
