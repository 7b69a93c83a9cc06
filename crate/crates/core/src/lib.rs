//! Variance-reduced stochastic methods for heterogeneous finite sums.

pub mod adversarial;
pub mod composite;
pub mod dual;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod sampling;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
