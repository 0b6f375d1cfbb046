//! Multilevel Monte Carlo for random PDE solutions with hp level
//! hierarchies, confidence-bounded sample allocation and a nodal DG solver.

pub mod dg;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod hierarchy;
pub mod quadrature;
pub mod quantiles;
pub mod random;

pub use error::{Error, Result};
