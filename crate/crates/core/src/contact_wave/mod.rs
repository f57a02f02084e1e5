//! The contact discontinuity of the Euler system and its viscous
//! approximation built from the self-similar solution of a nonlinear
//! diffusion equation.

mod coords;
mod riemann;
mod selfsimilar;
mod wave;

pub use coords::{
    eulerian_coordinates, eulerian_wave, lagrangian_coordinates, lagrangian_to_eulerian, particle_origin, EulerianWave,
};
pub use riemann::{euler_riemann_contact, RiemannContact};
pub use selfsimilar::{
    diffusivity, fit_tail, relaxation_oracle, solve_selfsimilar, OracleOptions, ProfilePoint, SelfSimilarOptions,
    SelfSimilarProfile, TailFit, MIN_HALF_WIDTH,
};
pub use wave::{build_wave, wave_residuals, ContactWaveField};
