//! Exact and Monte Carlo tools for the unit-mean renewal exit count, the
//! matching pure-birth entrance count, self-similar selection policies on
//! a planar Poisson scatter, and the cut-and-stack coupling between them.

pub mod analytic;
pub mod coupling;
pub mod error;
pub mod policies;
pub mod processes;
pub mod stats;

pub use error::{Error, Result};
