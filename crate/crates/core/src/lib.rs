//! Numerical laboratory for the minimal-surface equation in Minkowski space.

// `!(x > 0.0)` also rejects NaN; index loops mirror the tensor notation
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod conformal;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod membrane;
pub mod solver;
pub mod symmetry;
pub mod testfn;

pub use error::{Error, Result};
