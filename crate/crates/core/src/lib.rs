//! John s-ellipsoids and John s-functions of log-concave functions on R^d.
//!
//! The crate covers the whole pipeline at desk scale (d ≤ 3): an algebra of
//! evaluable log-concave functions, the s-volume kernel, the interpolation
//! operators, a convex solver for the maximal s-volume ellipsoid under the
//! s-lifting, optimality certificates from contact points, the s → 0 and
//! s → ∞ limit objects, and a quantitative Helly selector.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod config;
mod error;
pub mod fnalg;
pub mod helly;
pub mod interp;
pub mod limits;
pub mod linalg;
pub mod optim;
pub mod oracle;
pub mod program;
pub mod quad;
pub mod scalar;
pub mod sgeom;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use config::RunConfig;
pub use fnalg::LogConcaveFn;
pub use sgeom::SymEllipsoid;
pub use solver::JohnResult;
