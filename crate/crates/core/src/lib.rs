//! Szegő kernel expansions on Sasakian and weighted spheres.
//!
//! The crate computes the first coefficients of the on-diagonal expansion of
//! the equivariant Szegő kernel from local curvature data, evaluates exact
//! kernels for weighted sphere models, and runs the numerical experiments that
//! compare the two.

pub mod brt;
pub mod coefficients;
pub mod curvature;
pub mod error;
pub mod exec;
pub mod harness;
pub mod jet;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};
pub use exec::Exec;
pub use jet::{C64, Expr, Jet, JetContext, JetMatrix};
