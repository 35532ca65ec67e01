//! Steady compressible Euler flows on unstructured triangular meshes.
//!
//! Continuous P1 finite elements, an invariant-domain-preserving low-order
//! scheme, monolithic convex limiting (MCL) of the high-order correction and
//! implicit pseudo-time stepping with a low-order Jacobian.

pub mod assembly;
pub mod cases;
pub mod checks;
pub mod config;
pub mod driver;
pub mod euler;
pub mod limiter;
pub mod linalg;
pub mod low_order;
pub mod mesh;
pub mod output;
pub mod solver;
