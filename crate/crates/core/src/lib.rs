#![cfg_attr(not(feature = "std"), no_std)]
//! Numerical core for the one-electron two-centre ion in a weak uniform
//! magnetic field: variational electronic energies, magnetic
//! susceptibilities, potential surfaces and rovibrational levels.
//!
//! The crate is `no_std` + `alloc` with the `std` feature disabled.

// Negated float comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod electronic;
pub mod error;
pub mod linalg;
pub mod magnetics;
mod math;
pub mod quadrature;
pub mod rovib;
pub mod simplex;
pub mod spline;
pub mod surface;
pub mod units;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
