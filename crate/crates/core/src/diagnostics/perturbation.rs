use serde::{Deserialize, Serialize};

use super::lagrangian::LagrangianView;
use crate::contact_wave::ContactWaveField;
use crate::error::{check_len, Error, Result};
use crate::numerics::cumulative_trapezoid;

/// Largest value of `φ, ψ, ω` tolerated at the left end before integrating.
pub const LEFT_TAIL_TOL: f64 = 1e-6;

/// Scaled perturbation of a solution around the contact wave, in `y = x/√ε`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbationFields {
    pub epsilon: f64,
    pub tau: f64,
    pub y: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<[f64; 3]>,
    pub zeta: Vec<f64>,
    pub omega: Vec<f64>,
    /// Antiderivatives from the left end; empty until computed.
    pub big_phi: Vec<f64>,
    pub big_psi: Vec<[f64; 3]>,
    pub wbar: Vec<f64>,
    pub w: Vec<f64>,
    pub y_corr: Vec<f64>,
}

/// `φ = (v − v̄)/√ε`, `ψ = (u − ū)/√ε`, `ζ = (θ − θ̄)/√ε` and
/// `ω = ((θ + |u|²/2) − (θ̄ + |ū|²/2))/√ε` on the wave's grid.
pub fn scaled_perturbation(
    x: &[f64],
    v: &[f64],
    u: &[[f64; 3]],
    theta: &[f64],
    wave: &ContactWaveField,
    epsilon: f64,
    t: f64,
) -> Result<PerturbationFields> {
    let n = x.len();
    for len in [v.len(), u.len(), theta.len(), wave.len()] {
        check_len(n, len)?;
    }
    if x.iter().zip(&wave.x).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs())) {
        return Err(Error::Precondition("solution and wave are on different grids".into()));
    }
    let s = epsilon.sqrt();
    let energy = |th: f64, u: &[f64; 3]| th + 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    Ok(PerturbationFields {
        epsilon,
        tau: t / s,
        y: x.iter().map(|x| x / s).collect(),
        phi: (0..n).map(|i| (v[i] - wave.vbar[i]) / s).collect(),
        psi: (0..n)
            .map(|i| {
                let (a, b) = (u[i], wave.ubar[i]);
                [(a[0] - b[0]) / s, (a[1] - b[1]) / s, (a[2] - b[2]) / s]
            })
            .collect(),
        zeta: (0..n).map(|i| (theta[i] - wave.thetabar[i]) / s).collect(),
        omega: (0..n).map(|i| (energy(theta[i], &u[i]) - energy(wave.thetabar[i], &wave.ubar[i])) / s).collect(),
        ..Default::default()
    })
}

pub fn perturbation_from_view(view: &LagrangianView) -> Result<PerturbationFields> {
    scaled_perturbation(&view.labels, &view.v, &view.u, &view.theta, &view.wave, view.epsilon, view.t)
}

/// Fills `Φ, Ψ, W̄` by cumulative trapezoid integration from `y_min`, then
/// `W = W̄ − ū1 Ψ1` and `Y = ½√ε |Ψ_y|² − ū1_y Ψ1`.
pub fn antiderivatives(fields: &mut PerturbationFields, wave: &ContactWaveField, tail_tol: f64) -> Result<()> {
    let n = fields.y.len();
    check_len(n, wave.len())?;
    if n == 0 {
        return Ok(());
    }
    let left =
        fields.phi[0].abs().max(fields.omega[0].abs()).max(fields.psi[0].iter().fold(0.0, |a, b| a.max(b.abs())));
    if !(left < tail_tol) {
        return Err(Error::Precondition(format!(
            "perturbation does not decay at the left end (|field| = {left:.3e} >= {tail_tol:.1e}); antiderivative invalid"
        )));
    }
    let y = &fields.y;
    fields.big_phi = cumulative_trapezoid(y, &fields.phi);
    let comps: Vec<Vec<f64>> =
        (0..3).map(|a| cumulative_trapezoid(y, &fields.psi.iter().map(|p| p[a]).collect::<Vec<_>>())).collect();
    fields.big_psi = (0..n).map(|i| [comps[0][i], comps[1][i], comps[2][i]]).collect();
    fields.wbar = cumulative_trapezoid(y, &fields.omega);
    let s = fields.epsilon.sqrt();
    fields.w = (0..n).map(|i| fields.wbar[i] - wave.ubar[i][0] * fields.big_psi[i][0]).collect();
    fields.y_corr = (0..n)
        .map(|i| {
            let p = fields.psi[i];
            let u1y = s * wave.u1_x[i];
            0.5 * s * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - u1y * fields.big_psi[i][0]
        })
        .collect();
    Ok(())
}
