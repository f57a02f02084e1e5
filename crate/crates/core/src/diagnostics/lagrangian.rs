use serde::{Deserialize, Serialize};

use crate::contact_wave::{build_wave, lagrangian_coordinates, ContactWaveField, SelfSimilarProfile};
use crate::error::{Error, Result};
use crate::kinetic::KineticSnapshot;

/// Kinetic moments at the Lagrangian labels of their Eulerian cells, with the
/// contact wave evaluated at the same labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianView {
    pub t: f64,
    pub epsilon: f64,
    /// Eulerian cell centers.
    pub xe: Vec<f64>,
    pub dxe: f64,
    /// Lagrangian labels of the cells.
    pub labels: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
    pub wave: ContactWaveField,
}

impl LagrangianView {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `dy = ρ dX / √ε` per cell.
    pub fn dy_weights(&self) -> Vec<f64> {
        let s = self.epsilon.sqrt();
        self.v.iter().map(|v| self.dxe / (v * s)).collect()
    }
}

/// Labels are `x = ∫₀^X ρ − m₀`, with `m₀` the mass that crossed `X = 0`.
pub fn lagrangian_view(
    snapshot: &KineticSnapshot,
    profile: &SelfSimilarProfile,
    epsilon: f64,
) -> Result<LagrangianView> {
    let m = &snapshot.moments;
    let labels = lagrangian_coordinates(&m.x, &m.rho, snapshot.ledger.mass_through_origin)?;
    if labels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonPhysical("Lagrangian labels are not increasing".into()));
    }
    let wave = build_wave(profile, epsilon, snapshot.t, &labels)?;
    Ok(LagrangianView {
        t: snapshot.t,
        epsilon,
        xe: m.x.clone(),
        dxe: snapshot.f.dx,
        labels,
        v: m.rho.iter().map(|r| 1.0 / r).collect(),
        u: m.u.clone(),
        theta: m.theta.clone(),
        wave,
    })
}
