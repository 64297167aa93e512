#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

//! Multi-term time-fractional diffusion on an interval.

pub mod cli;
pub mod config;
pub mod error;
pub mod laplace;
pub mod mild_solver;
pub mod quadrature;
pub mod specfun;
pub mod spectral;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
