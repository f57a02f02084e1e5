use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::velocity::GAS_CONSTANT;

/// Piecewise-constant Euler contact discontinuity at rest, in Lagrangian
/// variables `(v, u, θ)` with `v = 1/ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannContact {
    pub v_minus: f64,
    pub theta_minus: f64,
    pub v_plus: f64,
    pub theta_plus: f64,
    pub p_plus: f64,
}

impl RiemannContact {
    pub fn delta(&self) -> f64 {
        (self.theta_plus - self.theta_minus).abs()
    }

    /// `(v, u1, θ)` at Lagrangian position `x`; the value at `x = 0` is the
    /// right state.
    pub fn state_at(&self, x: f64) -> (f64, f64, f64) {
        if x < 0.0 {
            (self.v_minus, 0.0, self.theta_minus)
        } else {
            (self.v_plus, 0.0, self.theta_plus)
        }
    }

    pub fn pressure_minus(&self) -> f64 {
        GAS_CONSTANT * self.theta_minus / self.v_minus
    }

    pub fn pressure_plus(&self) -> f64 {
        GAS_CONSTANT * self.theta_plus / self.v_plus
    }
}

/// Contact data from the left state and the right temperature; `v₊` follows
/// from pressure matching `Rθ₋/v₋ = Rθ₊/v₊`.
pub fn euler_riemann_contact(v_minus: f64, theta_minus: f64, theta_plus: f64) -> Result<RiemannContact> {
    for (name, value) in [("v_minus", v_minus), ("theta_minus", theta_minus), ("theta_plus", theta_plus)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(invalid(name, format!("must be positive, got {value}")));
        }
    }
    let v_plus = v_minus * theta_plus / theta_minus;
    Ok(RiemannContact { v_minus, theta_minus, v_plus, theta_plus, p_plus: GAS_CONSTANT * theta_minus / v_minus })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_contact_has_no_jump() {
        let c = euler_riemann_contact(1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.v_plus, 1.0);
        assert_eq!(c.delta(), 0.0);
    }

    #[test]
    fn pressure_matches_on_both_sides() {
        let c = euler_riemann_contact(1.0, 1.0, 1.2).unwrap();
        assert!((c.v_plus - 1.2).abs() < 1e-15);
        assert!((c.p_plus - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.pressure_plus() - 2.0 / 3.0).abs() < 1e-15);

        let c = euler_riemann_contact(2.0, 0.9, 1.1).unwrap();
        assert!((c.v_plus - 2.0 * 11.0 / 9.0).abs() < 1e-15);
        assert!((c.pressure_minus() - c.pressure_plus()).abs() < 1e-15);
        assert_eq!(c.state_at(-1.0), (2.0, 0.0, 0.9));
    }

    #[test]
    fn rejects_nonpositive_input() {
        assert!(euler_riemann_contact(0.0, 1.0, 1.0).is_err());
        assert!(euler_riemann_contact(1.0, -1.0, 1.0).is_err());
        assert!(euler_riemann_contact(1.0, 1.0, f64::NAN).is_err());
    }
}
