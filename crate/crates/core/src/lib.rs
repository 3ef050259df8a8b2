//! Exact non-Markovian dynamics of a harmonic force probe coupled to a
//! Gaussian bath, and the quantum Fisher information of the force.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod correlation;
pub mod error;
pub mod metrology;
pub mod probe;
pub mod quadrature;
pub mod response;
pub mod sequential;

pub use error::{Error, Result};
