//! Monotone wide-stencil solver for the Dirichlet problem of the normalized
//! p-Laplacian (`n < p <= inf`) together with numerical verifiers for
//! ABP-type maximum principles and Hölder estimates.

pub mod cli;
pub mod envelope;
pub mod error;
pub mod estimates;
pub mod experiments;
pub mod grid;
pub mod operators;
pub mod params;
pub mod selftest;
pub mod solver;

pub use error::{Error, Result};
