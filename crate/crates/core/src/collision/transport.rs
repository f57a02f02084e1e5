use serde::{Deserialize, Serialize};

use super::{build_linearized, CollisionKind, CollisionModel, LinearizedOperator};
use crate::error::{invalid, Error, Result};
use crate::numerics::CubicSpline;
use crate::velocity::{Primitive, VelocityGrid, GAS_CONSTANT};

/// Viscosity and heat conductivity at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportCoefficients {
    pub mu: f64,
    pub lambda: f64,
}

impl TransportCoefficients {
    /// Closed forms for the relaxation model: `μ = p/ν0`, `λ = (5/2) R² ρθ / ν0`.
    pub fn bgk(rho: f64, theta: f64, nu0: f64) -> Self {
        let p = GAS_CONSTANT * rho * theta;
        Self { mu: p / nu0, lambda: 2.5 * GAS_CONSTANT * GAS_CONSTANT * rho * theta / nu0 }
    }
}

/// Chapman–Enskog coefficients extracted from the linearized operator at rest.
///
/// `μ = −3/(4Rθ) ∫ ξ1² L⁻¹P1(ξ1² M)` and `λ = −1/(4Rθ²) ∫ ξ1|ξ|² L⁻¹P1(ξ1|ξ|² M)`.
/// For the relaxation model the closed form is returned; the solve path is
/// still available through [`coefficients_from_operator`].
pub fn transport_coefficients(
    rho: f64,
    theta: f64,
    grid: &VelocityGrid,
    model: &CollisionModel,
) -> Result<TransportCoefficients> {
    let state = Primitive::new(rho, [0.0; 3], theta)?;
    match model.kind {
        CollisionKind::Bgk => {
            model.validate()?;
            Ok(TransportCoefficients::bgk(rho, theta, model.nu0))
        }
        CollisionKind::HardSphere => {
            let op = build_linearized(&state, grid, model)?;
            coefficients_from_operator(&op, grid)
        }
    }
}

/// Flux moments of `L⁻¹` applied to the shear and heat-flux sources.
pub fn coefficients_from_operator(op: &LinearizedOperator, grid: &VelocityGrid) -> Result<TransportCoefficients> {
    let s = *op.state();
    if s.u.iter().any(|v| *v != 0.0) {
        return Err(Error::Precondition("transport coefficients are extracted at rest".into()));
    }
    let rt = GAS_CONSTANT * s.theta;
    let m = op.basis().weight();
    let shear: Vec<f64> = grid.nodes().iter().zip(m).map(|(x, mv)| x[0] * x[0] * mv).collect();
    let heat: Vec<f64> =
        grid.nodes().iter().zip(m).map(|(x, mv)| x[0] * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * mv).collect();
    let xs = op.solve(&op.p1(&shear))?;
    let xh = op.solve(&op.p1(&heat))?;
    let mut ms = 0.0;
    let mut mh = 0.0;
    for ((x, w), (a, b)) in grid.nodes().iter().zip(grid.weights()).zip(xs.iter().zip(&xh)) {
        ms += w * x[0] * x[0] * a;
        mh += w * x[0] * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * b;
    }
    let mu = -3.0 / (4.0 * rt) * ms;
    let lambda = -1.0 / (4.0 * rt * s.theta) * mh;
    if !(mu > 0.0) || !(lambda > 0.0) {
        return Err(Error::Certification(format!("non-positive transport coefficients mu={mu}, lambda={lambda}")));
    }
    Ok(TransportCoefficients { mu, lambda })
}

/// `μ(θ)` and `λ(θ)` along the contact isobar, tabulated and interpolated
/// with a natural cubic spline.
///
/// Along a contact wave the density follows the temperature through
/// `ρ = p₊/(Rθ)`. For the relaxation model the coefficients depend on `ρ`, so
/// the table evaluates them on that isobar; hard-sphere coefficients do not
/// depend on density.
#[derive(Debug, Clone)]
pub struct TransportTable {
    theta: Vec<f64>,
    mu: Vec<f64>,
    lambda: Vec<f64>,
    mu_spline: Option<CubicSpline>,
    lambda_spline: Option<CubicSpline>,
}

impl TransportTable {
    /// Tabulates `coeffs(θ)` on `n` uniform nodes of `[theta_min, theta_max]`.
    /// A degenerate range stores one node and evaluates as a constant.
    pub fn tabulate<F>(theta_min: f64, theta_max: f64, n: usize, mut coeffs: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<TransportCoefficients>,
    {
        if !(theta_min > 0.0) || !(theta_max >= theta_min) {
            return Err(invalid("theta range", format!("[{theta_min}, {theta_max}] is not a positive interval")));
        }
        let n = if theta_max > theta_min { n.max(2) } else { 1 };
        let theta: Vec<f64> = (0..n)
            .map(|i| if n == 1 { theta_min } else { theta_min + (theta_max - theta_min) * i as f64 / (n - 1) as f64 })
            .collect();
        let mut mu = Vec::with_capacity(n);
        let mut lambda = Vec::with_capacity(n);
        for &t in &theta {
            let c = coeffs(t)?;
            if !(c.mu > 0.0) || !(c.lambda > 0.0) {
                return Err(invalid("transport", format!("non-positive coefficients {c:?} at theta={t}")));
            }
            mu.push(c.mu);
            lambda.push(c.lambda);
        }
        let (mu_spline, lambda_spline) = if n >= 3 {
            (Some(CubicSpline::new(theta.clone(), mu.clone())?), Some(CubicSpline::new(theta.clone(), lambda.clone())?))
        } else {
            (None, None)
        };
        Ok(Self { theta, mu, lambda, mu_spline, lambda_spline })
    }

    /// Table for `model` along the isobar `p₊` over `[theta_min, theta_max]`.
    ///
    /// The relaxation model is evaluated in closed form; the hard-sphere model
    /// builds one linearized operator per node on `grid`.
    pub fn for_model(
        model: &CollisionModel,
        p_plus: f64,
        theta_min: f64,
        theta_max: f64,
        nodes: usize,
        grid: &VelocityGrid,
    ) -> Result<Self> {
        model.validate()?;
        match model.kind {
            CollisionKind::Bgk => Self::tabulate(theta_min, theta_max, nodes, |t| {
                Ok(TransportCoefficients::bgk(p_plus / (GAS_CONSTANT * t), t, model.nu0))
            }),
            CollisionKind::HardSphere => {
                Self::tabulate(theta_min, theta_max, nodes, |t| transport_coefficients(1.0, t, grid, model))
            }
        }
    }

    /// Constant coefficients, mostly for tests and synthetic setups.
    pub fn constant(mu: f64, lambda: f64) -> Result<Self> {
        Self::tabulate(1.0, 1.0, 1, |_| Ok(TransportCoefficients { mu, lambda }))
    }

    fn interp(&self, spline: &Option<CubicSpline>, values: &[f64], theta: f64) -> f64 {
        match spline {
            Some(s) => s.eval(theta),
            None if values.len() == 1 => values[0],
            None => crate::numerics::interp_linear(&self.theta, values, theta),
        }
    }

    pub fn mu(&self, theta: f64) -> f64 {
        self.interp(&self.mu_spline, &self.mu, theta)
    }

    pub fn lambda(&self, theta: f64) -> f64 {
        self.interp(&self.lambda_spline, &self.lambda, theta)
    }

    /// Tabulated nodes as `(θ, μ, λ)`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.theta.iter().zip(&self.mu).zip(&self.lambda).map(|((t, m), l)| (*t, *m, *l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bgk_closed_form_agrees_with_solve_path() {
        let g = VelocityGrid::new([24, 20, 20], 6.0, 1.2).unwrap();
        for &(rho, theta, nu0) in &[(1.0, 1.0, 1.0), (0.8, 1.2, 2.5)] {
            let model = CollisionModel::bgk(nu0).unwrap();
            let op = build_linearized(&Primitive::at_rest(rho, theta), &g, &model).unwrap();
            let solved = coefficients_from_operator(&op, &g).unwrap();
            let closed = transport_coefficients(rho, theta, &g, &model).unwrap();
            assert!((solved.mu - closed.mu).abs() < 1e-4 * closed.mu, "{solved:?} {closed:?}");
            assert!((solved.lambda - closed.lambda).abs() < 1e-4 * closed.lambda, "{solved:?} {closed:?}");
            assert!((closed.mu - GAS_CONSTANT * rho * theta / nu0).abs() < 1e-15);
        }
    }

    #[test]
    fn bgk_ratio_independent_of_density() {
        let a = TransportCoefficients::bgk(0.7, 1.1, 1.3);
        let b = TransportCoefficients::bgk(1.9, 1.1, 1.3);
        assert!((a.lambda / a.mu - b.lambda / b.mu).abs() < 1e-14);
    }

    #[test]
    fn bgk_isobar_table_is_constant() {
        let g = VelocityGrid::new([8, 8, 8], 5.0, 1.2).unwrap();
        let model = CollisionModel::bgk(1.0).unwrap();
        let table = TransportTable::for_model(&model, 2.0 / 3.0, 1.0, 1.2, 5, &g).unwrap();
        // on the isobar ρθ = p₊/R is fixed, so both coefficients are constant
        for t in [1.0, 1.07, 1.2] {
            assert!((table.mu(t) - 2.0 / 3.0).abs() < 1e-12);
            assert!((table.lambda(t) - 2.5 * GAS_CONSTANT * 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn table_interpolates_smooth_coefficients() {
        let table =
            TransportTable::tabulate(1.0, 2.0, 9, |t| Ok(TransportCoefficients { mu: t.sqrt(), lambda: 2.0 * t }))
                .unwrap();
        assert!((table.mu(1.37) - 1.37f64.sqrt()).abs() < 1e-4);
        assert!((table.lambda(1.37) - 2.74).abs() < 1e-12);
        assert!(TransportTable::tabulate(1.0, 2.0, 3, |_| Ok(TransportCoefficients { mu: -1.0, lambda: 1.0 })).is_err());
        assert_eq!(TransportTable::constant(0.5, 0.7).unwrap().lambda(3.0), 0.7);
    }
}
