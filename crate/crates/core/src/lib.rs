//! Hyperplane Maslov index for linear reaction-diffusion eigenvalue problems.
//!
//! `exterior` and `rp1` hold the algebraic and topological kernels, `flow`
//! propagates boundary subspaces, `closedform` covers constant coefficients
//! exactly, and `analysis` assembles the Maslov box.

pub mod analysis;
pub mod closedform;
pub mod error;
pub mod exterior;
pub mod flow;
pub mod rp1;

pub use error::{Error, Result};
