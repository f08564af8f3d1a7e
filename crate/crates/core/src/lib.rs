//! Numerical laboratory for distributional limit theorems of Birkhoff sums and
//! matrix cocycles over invertible measure-preserving systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`] and [`summation`] are the numerical plumbing (counter-based
//!   streams, compensated sums);
//! * [`dynamics`] provides the base systems `(X, d, mu, T, U)`;
//! * [`birkhoff`] builds ergodic sums and their normalisations on top;
//! * [`cocycle`] adds matrix cocycles, expansion functionals and Lyapunov
//!   spectra;
//! * [`zorich`] is the interval-exchange surrogate for Teichmueller dynamics;
//! * [`stats`] holds the empirical-distribution machinery and the plain,
//!   conditional and mixing limit-theorem estimators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birkhoff;
pub mod cocycle;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod stats;
pub mod summation;
pub mod zorich;

pub use error::{LabError, Result};

/// Version string embedded in every report.
pub const VERSION: &str = concat!("mixlimit ", env!("CARGO_PKG_VERSION"));
