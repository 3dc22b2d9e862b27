//! Linear time-delay models of periodic and quasi-periodic signals.
//!
//! The crate covers the whole chain from raw samples to diagnostics:
//! signal generators, one-period DFT and sparsity detection, time-domain and
//! spectral solvers for the delay transition weights, the vector-case rank
//! test, companion/HODMD modal analysis, and conditioning bounds for the
//! Vandermonde systems that appear along the way.
//!
//! Linear algebra runs on `ndarray` with LAPACK through `ndarray-linalg`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod conditioning;
pub mod delay_solver;
mod error;
pub mod linalg;
pub mod modal;
pub mod signals;
pub mod spectral;
pub mod vector_analysis;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
