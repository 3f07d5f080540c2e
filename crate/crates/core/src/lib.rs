//! Shape optimization of an obstacle in a 2D Stokes channel flow.
//!
//! The obstacle boundary is moved by adjoint-based shape-gradient descent so
//! that the vorticity of the flow (measured by the L² norm of the curl and by
//! the det-grad measure) is maximized, with a perimeter regularization and a
//! volume constraint handled either by an augmented Lagrangian or by
//! divergence-free deformation fields.
//!
//! The pipeline per descent iteration is:
//!
//! 1. [`flow::stokes_operator`] assembles and factorizes the Taylor–Hood saddle
//!    system, then solves the state and the adjoint.
//! 2. [`shapegrad`] extends the normal, computes the curvature and evaluates
//!    the boundary shape gradient.
//! 3. [`descent`] solves for an H¹-smoothed deformation field, line-searches
//!    the step and deforms the mesh.

pub mod descent;
pub mod error;
pub mod exec;
pub mod fem;
pub mod flow;
pub mod functionals;
pub mod geom;
pub mod mesh;
pub mod shapegrad;

pub use error::{Error, Result};
pub use exec::Execution;
