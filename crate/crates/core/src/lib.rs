//! Nonparametric spectral density estimation for gridded data with missing
//! values, using periodic embedding and iterative conditional simulation.

// `!(x > 0.0)` is used on purpose so NaN is rejected along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod circulant;
pub mod error;
pub mod estimator;
pub mod fft;
pub mod imputation;
pub mod lattice;
pub mod solver;
pub mod spectral;
pub mod study;

pub use error::{Error, Result};
