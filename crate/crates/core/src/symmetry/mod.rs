//! Vector fields commuting with the wave operator and the diagnostics
//! built from them.

mod commutation;
mod fit;
mod gamma;
mod norms;
mod nullratio;
mod reconstruct;

pub use commutation::{
    box_commutator_check, gamma_q_commutation_check, max_defect, CommutationTable, Defect, NullForm,
};
pub use fit::{fit_decay_exponent, DecayFit, MIN_FIT_SAMPLES};
pub use gamma::{apply_gamma, apply_gamma_multi, GammaIndex, TimeJet};
pub use norms::{
    bootstrap_norms, read_norm_csv, weighted_sup, write_norm_csv, DiagnosticsConfig, NormRecord,
    NORM_CSV_HEADER,
};
pub use nullratio::{nullform_decay_ratio, nullform_ratio_of_jet, EXCLUSION};
pub use reconstruct::{
    reconstruct_gradient, reconstruct_gradient_from_jet, reconstruct_gradients, GradientReconstruction,
    CONE_CLEARANCE,
};
