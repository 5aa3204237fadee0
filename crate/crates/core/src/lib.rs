//! Splitting-in-potential Crank-Nicolson scheme with discrete transparent
//! boundary conditions for the 2D time-dependent Schrödinger equation on a
//! strip.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod mesh;
pub mod model;
pub mod parallel;
pub mod reference;
pub mod spectral;
pub mod splitting;
pub mod tbc;
pub mod tridiag;

pub use error::{Error, Result};
