//! Collision models: the BGK relaxation surrogate and the hard-sphere
//! Boltzmann operator, their linearizations, transport coefficients and the
//! measured operator constants.

mod bgk;
mod certify;
mod hard_sphere;
mod linearized;
mod transport;

pub use bgk::bgk_collision;
pub use certify::{certify_operator_properties, CertificationReport, ProjectionMomentEntry};
pub use hard_sphere::{collision_frequency, fit_envelope, hard_sphere_q, HardSphereKernel, HardSphereOutput};
pub use linearized::{build_linearized, solve_lm_inverse, LinearizedOperator};
pub use transport::{coefficients_from_operator, transport_coefficients, TransportCoefficients, TransportTable};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::gauss_legendre;

/// Smallest angular counts accepted by default for the sphere quadrature.
pub const MIN_ANGULAR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionKind {
    Bgk,
    HardSphere,
}

/// Constants of the collision-frequency envelope `ν_lower ≤ ν(ξ) ≤ c (1+|ξ|)^κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEnvelope {
    pub nu_lower: f64,
    pub c: f64,
    pub kappa: f64,
}

/// Quadrature on the unit sphere for the hard-sphere kernel.
///
/// Nodes are laid out in a frame whose pole is the relative velocity, with
/// Gauss–Legendre nodes in `cos ϑ ∈ [0, 1]` and uniform azimuths. Only the
/// upper hemisphere is stored: `Ω` and `−Ω` produce the same collision, so each
/// node carries twice its hemisphere weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularQuadrature {
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl AngularQuadrature {
    pub fn new(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        Self::with_minimum(n_polar, n_azimuth, MIN_ANGULAR)
    }

    pub fn with_minimum(n_polar: usize, n_azimuth: usize, minimum: usize) -> Result<Self> {
        if n_polar < minimum || n_azimuth < minimum {
            return Err(invalid(
                "angular",
                format!("({n_polar}, {n_azimuth}) is below the minimum ({minimum}, {minimum})"),
            ));
        }
        Ok(Self { n_polar, n_azimuth })
    }

    /// `(cos ϑ, φ, weight)` triples; weights sum to `4π` (full sphere).
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        let (c, wc) = gauss_legendre(self.n_polar, 0.0, 1.0);
        let dphi = 2.0 * std::f64::consts::PI / self.n_azimuth as f64;
        let mut out = Vec::with_capacity(self.n_polar * self.n_azimuth);
        for (ci, wi) in c.iter().zip(&wc) {
            for p in 0..self.n_azimuth {
                out.push((*ci, (p as f64 + 0.5) * dphi, 2.0 * wi * dphi));
            }
        }
        out
    }
}

impl Default for AngularQuadrature {
    fn default() -> Self {
        Self { n_polar: MIN_ANGULAR, n_azimuth: MIN_ANGULAR }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionModel {
    pub kind: CollisionKind,
    pub nu0: f64,
    pub angular: AngularQuadrature,
    /// Filled in once the frequency has been measured.
    pub envelope: Option<FrequencyEnvelope>,
}

impl CollisionModel {
    pub fn bgk(nu0: f64) -> Result<Self> {
        let m = Self { kind: CollisionKind::Bgk, nu0, angular: AngularQuadrature::default(), envelope: None };
        m.validate()?;
        Ok(m)
    }

    pub fn hard_sphere(angular: AngularQuadrature) -> Result<Self> {
        let m = Self { kind: CollisionKind::HardSphere, nu0: 1.0, angular, envelope: None };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            CollisionKind::Bgk => {
                if !(self.nu0 > 0.0) || !self.nu0.is_finite() {
                    return Err(invalid("nu0", format!("must be positive, got {}", self.nu0)));
                }
            }
            CollisionKind::HardSphere => {
                AngularQuadrature::new(self.angular.n_polar, self.angular.n_azimuth)?;
            }
        }
        if let Some(e) = self.envelope {
            if !(e.nu_lower > 0.0) || !(0.0..=1.0).contains(&e.kappa) || !e.c.is_finite() {
                return Err(invalid("envelope", format!("inconsistent constants {e:?}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_weights_and_first_moment() {
        let q = AngularQuadrature::new(8, 8).unwrap();
        let nodes = q.nodes();
        let total: f64 = nodes.iter().map(|n| n.2).sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-13);
        // ∫_{S²} |cos ϑ| dΩ = 2π
        let first: f64 = nodes.iter().map(|n| n.0 * n.2).sum();
        assert!((first - 2.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn coarse_angular_grid_rejected() {
        assert!(AngularQuadrature::new(4, 8).is_err());
        assert!(AngularQuadrature::with_minimum(4, 4, 4).is_ok());
    }

    #[test]
    fn model_validation() {
        assert!(CollisionModel::bgk(0.0).is_err());
        assert!(CollisionModel::bgk(2.0).is_ok());
        let mut m = CollisionModel::hard_sphere(AngularQuadrature::default()).unwrap();
        m.envelope = Some(FrequencyEnvelope { nu_lower: 1.0, c: 2.0, kappa: 1.5 });
        assert!(m.validate().is_err());
    }
}
