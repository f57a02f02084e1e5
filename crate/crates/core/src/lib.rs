//! Kinetic and fluid solvers for the hydrodynamic limit of the Boltzmann
//! equation around a contact discontinuity.
//!
//! The crate is organised bottom-up: [`velocity`] holds the discrete velocity
//! space, [`micromacro`] the fluid/non-fluid split, [`collision`] the collision
//! models, [`contact_wave`] the viscous contact wave, [`fluid`] and [`kinetic`]
//! the two solvers, and [`diagnostics`] the error and energy measurements.

pub mod collision;
pub mod contact_wave;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod kinetic;
pub mod micromacro;
pub mod numerics;
pub mod velocity;

pub use collision::{
    bgk_collision, build_linearized, certify_operator_properties, collision_frequency, fit_envelope, hard_sphere_q,
    solve_lm_inverse, transport_coefficients, AngularQuadrature, CertificationReport, CollisionKind, CollisionModel,
    FrequencyEnvelope, LinearizedOperator, TransportCoefficients, TransportTable,
};
pub use contact_wave::{
    build_wave, euler_riemann_contact, eulerian_wave, lagrangian_to_eulerian, solve_selfsimilar, wave_residuals,
    ContactWaveField, EulerianWave, RiemannContact, SelfSimilarOptions, SelfSimilarProfile,
};
pub use error::{Error, Result};
pub use fluid::{
    ns_run, ns_step, self_convergence_order, ConservationLedger, FarField, FluidField, FluidRunConfig, FluidSnapshot,
    FluidSolver, FluidTrajectory,
};
pub use kinetic::{
    init_from_wave, kinetic_run, kinetic_step, InvariantLedger, KineticConfig, KineticSnapshot, KineticState,
    KineticTrajectory, MomentProfile, TransportScheme,
};
pub use micromacro::{
    build_basis, discrete_maxwellian, local_basis, project, weighted_inner, weighted_l2_error, GlobalMaxwellian,
    MacroBasis, MicroMacroSplit,
};
pub use velocity::{
    build_velocity_grid, maxwellian, moments, primitive_from_conserved, DistributionField, FluidMoments, Frame,
    GridMetadata, Primitive, QuadratureRule, VelocityGrid, GAS_CONSTANT,
};
