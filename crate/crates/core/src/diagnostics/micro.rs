use rayon::prelude::*;

use super::lagrangian::LagrangianView;
use crate::collision::LinearizedOperator;
use crate::error::{check_len, Result};
use crate::micromacro::MacroBasis;
use crate::velocity::{moments_unchecked, primitive_from_conserved, DistributionField, VelocityGrid};

/// Scaled non-fluid part `Ḡ = ε^{-1/2} P1 f`, its leading-order part `Ḡ0`
/// driven by the wave gradients, and the remainder `Ḡ1 = Ḡ − Ḡ0`. Stored
/// cell-major like the distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GFields {
    pub nv: usize,
    pub g_bar: Vec<f64>,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
}

/// How `L_M⁻¹` is applied on microscopic functions.
#[derive(Debug, Clone, Copy)]
pub enum MicroInverse<'a> {
    /// `L_M = −ν0 P1`, inverted in closed form with each cell's own basis.
    Bgk { nu0: f64 },
    /// One operator frozen at a reference state; the right-hand side is
    /// projected onto its microscopic subspace first.
    Frozen(&'a LinearizedOperator),
}

/// `Ḡ0 = (3/(2vθ)) L_M⁻¹ P1[ξ1 (|ξ−u|²/(2θ) θ̄_y + ξ·ū_y) M]` per cell, with
/// `(v, u, θ, M)` from the cell's moments and the gradients from the wave.
pub fn micro_decomposition_g(
    f: &DistributionField,
    grid: &VelocityGrid,
    view: &LagrangianView,
    inverse: MicroInverse<'_>,
) -> Result<GFields> {
    check_len(grid.len(), f.nv)?;
    check_len(view.len(), f.nx())?;
    let nv = grid.len();
    let s = view.epsilon.sqrt();
    let cells: Vec<(Vec<f64>, Vec<f64>)> = (0..f.nx())
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, Vec<f64>)> {
            let slot = f.slice(i);
            let state = primitive_from_conserved(&moments_unchecked(slot, grid))?;
            let basis = MacroBasis::new(state, grid)?;
            let g_bar: Vec<f64> = basis.p1(slot, grid).into_iter().map(|g| g / s).collect();
            let theta_y = s * view.wave.theta_x[i];
            let u_y = [s * view.wave.u1_x[i], 0.0, 0.0];
            let (u, th) = (state.u, state.theta);
            let rhs: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(basis.weight())
                .map(|(xi, m)| {
                    let c2 = (xi[0] - u[0]).powi(2) + (xi[1] - u[1]).powi(2) + (xi[2] - u[2]).powi(2);
                    let drive = c2 / (2.0 * th) * theta_y + xi[0] * u_y[0] + xi[1] * u_y[1] + xi[2] * u_y[2];
                    xi[0] * drive * m
                })
                .collect();
            let micro = basis.p1(&rhs, grid);
            let inv = match inverse {
                MicroInverse::Bgk { nu0 } => micro.into_iter().map(|v| -v / nu0).collect(),
                MicroInverse::Frozen(op) => op.solve(&op.p1(&micro))?,
            };
            let scale = 1.5 / ((1.0 / state.rho) * th);
            Ok((g_bar, inv.into_iter().map(|v| v * scale).collect()))
        })
        .collect::<Result<_>>()?;
    let mut out = GFields {
        nv,
        g_bar: Vec::with_capacity(f.values.len()),
        g0: Vec::with_capacity(f.values.len()),
        g1: Vec::with_capacity(f.values.len()),
    };
    for (g, g0) in cells {
        out.g1.extend(g.iter().zip(&g0).map(|(a, b)| a - b));
        out.g_bar.extend(g);
        out.g0.extend(g0);
    }
    Ok(out)
}
