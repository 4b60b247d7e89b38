//! The inversion `κ(p) = p / (p_0² - |p'|²)` of the forward light cone,
//! identity checks for how it acts on the wave operator and the null form,
//! and the route to global solutions through the compactified equation.

mod chart;
mod compact;
mod fixture;
mod pipeline;
mod rhs;
mod transform;
mod verify;

pub use chart::{
    hyperboloid_map_check, jacobian, kappa, kappa_coords, lorentz_square, pullback_metric, ConePoint,
    ConformalChart, Frame, HyperboloidParam,
};
pub use compact::{compactified_solve_1d, CompactConfig, CompactData, CompactSolution};
pub use fixture::CoefficientFixture;
pub use pipeline::{pipeline_compare, pipeline_refinement, PipelineConfig, PipelineReport};
pub use rhs::{compactified_rhs, compactified_split, verify_compactified_rhs, CompactifiedSplit, DENOMINATOR_THRESHOLD};
pub use transform::transform_to_compactified;
pub use verify::{
    catalog, fd_jet, fd_jet_at, involution_defect, local_step, pulled_back, random_points, reciprocity_defect,
    run_identity_suite, verify_box_rho_power, verify_conformal_box, verify_q00_power_rule, verify_q00_scaling,
    write_verification_csv, FdStep, IdentityDefect, DEFAULT_FD, DEFAULT_STEP, MIN_RHO,
};
