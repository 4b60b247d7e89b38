//! Uniform grids, scalar fields, finite-difference stencils and norms.

mod field;
mod grid;
pub(crate) mod reduce;
mod stencil;

pub use field::{norm_l2, norm_sup, ScalarField};
pub use grid::{GridSpec, DEFAULT_NODE_BUDGET};
pub use stencil::{derivative, fd_weights, interpolate, lagrange_weights, INTERP_POINTS};
pub(crate) use stencil::{D1_CENTERED, D2_CENTERED};
