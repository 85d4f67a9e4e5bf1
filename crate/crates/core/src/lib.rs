//! Moderate deviations and local limits for coefficients of random matrix
//! products: transfer operators, Cramér series, tilted Monte Carlo and an
//! exact enumeration oracle.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

pub mod cramer;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod measures;
pub mod montecarlo;
pub mod oracle;
pub mod smoothing;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
