//! Diagnostics on kinetic runs: Lagrangian views, scaled perturbations,
//! the non-fluid decomposition, the energy functional, pointwise error
//! profiles and the ε-convergence sweep.

mod energy;
mod error;
mod lagrangian;
mod micro;
mod perturbation;
mod sweep;

pub use energy::{
    energy_e6, energy_report, growth_check, snapshot_energy, DerivativeContext, DerivativeNorms, EnergyReport,
    EnergyRow, GrowthCheck, COMPONENT_NAMES, DEFAULT_GROWTH_SLACK, MAX_GROWTH_EXPONENT,
};
pub use error::{
    error_tail_fit, inviscid_reference, max_error, pointwise_error_profile, sup_error_away, viscous_reference,
    ErrorReference, ErrorTailFit,
};
pub use lagrangian::{lagrangian_view, LagrangianView};
pub use micro::{micro_decomposition_g, GFields, MicroInverse};
pub use perturbation::{
    antiderivatives, perturbation_from_view, scaled_perturbation, PerturbationFields, LEFT_TAIL_TOL,
};
pub use sweep::{
    certify_for, convergence_sweep, convergence_sweep_with, member_errors, run_member, sweep_snapshot_times,
    CertificationReference, ConvergenceReport, ErrorSample, RateFit, SweepMember, SweepOptions, SWEEP_NOISE_TOLERANCE,
};
