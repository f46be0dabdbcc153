//! Monge-Ampere solvers on convex polygons with Guillemin boundary behavior.
//!
//! The pipeline runs vertex compatibility checks ([`compat`]), solves the
//! edge ODEs that pin down the Dirichlet trace ([`edge_ode`]), computes the
//! discrete Alexandroff solution ([`ma`]), transforms it near an edge
//! ([`legendre`]) and fits the boundary expansion ([`expansion`]).

pub mod compat;
pub mod diagnostics;
pub mod edge_ode;
pub mod error;
pub mod expansion;
pub mod field;
pub mod geometry;
pub mod legendre;
pub mod linalg;
pub mod ma;
pub mod polygon;
pub mod quadrature;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use geometry::{EdgeFrame, HalfPlane, Polytope, Vec2};
pub use edge_ode::{BoundaryData, BoundaryTrace};
