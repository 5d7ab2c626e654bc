//! Momentum-map and group-quotient scenarios.

pub mod hilbert;
pub mod momentum;

pub use hilbert::{
    d3_gap, d3_image_check, hilbert_d3, on_d3_boundary, quasi_homog_check, reduce_control_data,
    D3ImageReport, HilbertModel, Polynomial, QuasiHomogReport, ReducedFiberedNbhd, ReducedReport,
};
pub use momentum::{
    crit_residual, cv_residual, moment, norm_sq_gradient_flow, quadratic_moment, TorusHamiltonian,
};
