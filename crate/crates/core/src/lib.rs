//! Cahn–Hilliard solver on triangular meshes.
//!
//! Space is discretized with the symmetric interior penalty discontinuous
//! Galerkin method, time with the average vector field method. The mobility
//! is lagged at the previous time level, so each step is one Newton solve of
//! a block system in the coefficients of `u_h` and `w_h`.

pub mod assembly;
pub mod dg;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod mesh;
pub mod model;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
