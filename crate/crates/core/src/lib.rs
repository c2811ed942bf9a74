//! C⁰ interior penalty discretization of the stream-function form of the
//! surface Stokes problem on closed level-set surfaces.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: analytic level sets, approximate normal/distance/projection.
//! * [`jets`]: third-order forward-mode Taylor arithmetic in three variables.
//! * [`exact`]: exact tangential calculus on the continuous surface, built on jets.
//! * [`mesh`]: octahedral base meshes and their polynomial-mapped counterparts.
//! * [`fe_space`]: Lagrange bases, quadrature, global degree-of-freedom maps.
//! * [`surface_ops`]: discrete differential geometry on mapped elements.
//! * [`assembly`]: the bilinear form, mean constraint, load vector and forcing.
//! * [`linalg`]: sparse symmetric storage, projected CG, dense oracles.
//! * [`analysis`]: error measures, observed orders, identity verification.
//! * [`study`]: the convergence-study driver used by the CLI.
//! * [`verify`]: verification suites used by the CLI.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod exact;
pub mod fe_space;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod mesh;
pub mod study;
pub mod surface_ops;
pub mod verify;

pub use error::{Error, Result};

/// Ambient 3-vector.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Ambient 3×3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
