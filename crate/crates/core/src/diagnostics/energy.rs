use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lagrangian::{lagrangian_view, LagrangianView};
use super::micro::{micro_decomposition_g, GFields, MicroInverse};
use super::perturbation::{antiderivatives, perturbation_from_view, PerturbationFields, LEFT_TAIL_TOL};
use crate::collision::CollisionKind;
use crate::error::{check_len, invalid, Error, Result};
use crate::kinetic::{bgk_rhs, KineticSnapshot, KineticTrajectory};
use crate::micromacro::discrete_maxwellian;
use crate::numerics::{fit_line, gradient_nonuniform, LineFit};
use crate::velocity::{moments_unchecked, primitive_from_conserved, DistributionField, VelocityGrid};

pub const COMPONENT_NAMES: [&str; 6] =
    ["antiderivative", "perturbation", "gradient", "g1", "g_first_derivatives", "f_second_derivatives"];

/// One row of the energy trace. Components, in order:
/// `‖(Φ,Ψ,W)‖²`, `‖(φ,ψ,ζ)‖²`, `ε‖(φ_y,ψ_y,ζ_y)‖²`, `∫∫Ḡ1²/M*`,
/// `ε Σ_{|α|=1} ∫∫|∂^α Ḡ|²/M*` and `ε Σ_{|α|=2} ∫∫|∂^α f|²/M*`, derivatives
/// in `(y, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    pub tau: f64,
    pub components: [f64; 6],
    pub e6: f64,
    /// `E6 / (1 + √ε τ)^{1/2}`.
    pub growth_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub epsilon: f64,
    pub delta: f64,
    pub weights: [f64; 6],
    pub rows: Vec<EnergyRow>,
}

/// Integrated squares of the derivative fields, before the `ε` prefactor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivativeNorms {
    pub g_y: f64,
    pub g_tau: f64,
    pub f_yy: f64,
    pub f_ytau: f64,
    pub f_tautau: f64,
}

/// Far-field data needed to differentiate a kinetic snapshot in `X` and `t`.
pub struct DerivativeContext<'a> {
    pub grid: &'a VelocityGrid,
    pub epsilon: f64,
    pub nu0: f64,
    pub left: &'a [f64],
    pub right: &'a [f64],
    pub mstar: &'a [f64],
}

/// Centered `∂X` of a cell-major field with fixed ghost slices.
fn d_x(values: &[f64], nv: usize, dx: f64, left: &[f64], right: &[f64]) -> Vec<f64> {
    let nx = values.len() / nv;
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(nv).enumerate().for_each(|(i, slot)| {
        let m = if i == 0 { left } else { &values[(i - 1) * nv..i * nv] };
        let p = if i + 1 == nx { right } else { &values[(i + 1) * nv..(i + 2) * nv] };
        for k in 0..nv {
            slot[k] = (p[k] - m[k]) / (2.0 * dx);
        }
    });
    out
}

fn scale_cells(values: &mut [f64], nv: usize, factor: &[f64]) {
    values.par_chunks_mut(nv).zip(factor.par_iter()).for_each(|(slot, c)| slot.iter_mut().for_each(|v| *v *= c));
}

fn cell_maxwellians(values: &[f64], grid: &VelocityGrid) -> Result<Vec<f64>> {
    let nv = grid.len();
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(nv).zip(values.par_chunks(nv)).try_for_each(|(o, f)| -> Result<()> {
        let state = primitive_from_conserved(&moments_unchecked(f, grid))?;
        o.copy_from_slice(&discrete_maxwellian(&state, grid)?);
        Ok(())
    })?;
    Ok(out)
}

fn cell_velocity(values: &[f64], grid: &VelocityGrid) -> Vec<f64> {
    values
        .par_chunks(grid.len())
        .map(|f| {
            let m = moments_unchecked(f, grid);
            m.momentum[0] / m.rho
        })
        .collect()
}

impl DerivativeContext<'_> {
    fn field(&self, like: &DistributionField, values: Vec<f64>) -> DistributionField {
        let mut f = like.clone();
        f.values = values;
        f
    }

    /// `∂t f` from the BGK equation.
    fn rhs(&self, f: &DistributionField) -> Result<Vec<f64>> {
        Ok(bgk_rhs(f, self.grid, self.epsilon, self.nu0, (self.left, self.right))?.values)
    }

    /// Material derivative `D_t f = ∂t f + u1 ∂X f`.
    fn material(&self, f: &DistributionField) -> Result<Vec<f64>> {
        let nv = self.grid.len();
        let mut out = self.rhs(f)?;
        let mut fx = d_x(&f.values, nv, f.dx, self.left, self.right);
        scale_cells(&mut fx, nv, &cell_velocity(&f.values, self.grid));
        out.iter_mut().zip(&fx).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    fn step(values: &[f64], d: &[f64], h: f64) -> Vec<f64> {
        values.iter().zip(d).map(|(a, b)| a + h * b).collect()
    }

    /// Central directional step size: a relative change of about 1e-6.
    fn step_size(values: &[f64], d: &[f64]) -> f64 {
        let fmax = values.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let dmax = d.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if dmax == 0.0 {
            0.0
        } else {
            1e-6 * fmax / dmax
        }
    }

    fn weighted_norm(&self, values: &[f64], dy: &[f64]) -> f64 {
        let nv = self.grid.len();
        values
            .par_chunks(nv)
            .zip(dy.par_iter())
            .map(|(slot, d)| {
                d * slot.iter().zip(self.mstar).zip(self.grid.weights()).map(|((g, m), w)| w * g * g / m).sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    /// Derivative norms in `(y, τ)` using `∂y = √ε v ∂X` and `∂τ = √ε D_t`.
    pub fn norms(&self, f: &DistributionField, v: &[f64], dy: &[f64]) -> Result<DerivativeNorms> {
        check_len(f.nx(), v.len())?;
        let nv = self.grid.len();
        let eps = self.epsilon;
        let zero = vec![0.0; nv];
        let m = cell_maxwellians(&f.values, self.grid)?;
        let micro: Vec<f64> = f.values.iter().zip(&m).map(|(a, b)| a - b).collect();

        // Ḡ_y = v ∂X (P1 f); the far field is in equilibrium
        let mut g_y = d_x(&micro, nv, f.dx, &zero, &zero);
        scale_cells(&mut g_y, nv, v);

        // Ḡ_τ = D_t f − M'[f](D_t f)
        let dt_f = self.material(f)?;
        let h = Self::step_size(&f.values, &dt_f);
        let g_tau: Vec<f64> = if h > 0.0 {
            let mp = cell_maxwellians(&Self::step(&f.values, &dt_f, h), self.grid)?;
            let mm = cell_maxwellians(&Self::step(&f.values, &dt_f, -h), self.grid)?;
            (0..dt_f.len()).map(|k| dt_f[k] - (mp[k] - mm[k]) / (2.0 * h)).collect()
        } else {
            vec![0.0; dt_f.len()]
        };

        // f_yy = ε v ∂X (v ∂X f)
        let mut a = d_x(&f.values, nv, f.dx, self.left, self.right);
        scale_cells(&mut a, nv, v);
        let mut f_yy = d_x(&a, nv, f.dx, &zero, &zero);
        scale_cells(&mut f_yy, nv, &v.iter().map(|v| eps * v).collect::<Vec<_>>());

        // f_yτ = ε v ∂X (D_t f)
        let mut f_yt = d_x(&dt_f, nv, f.dx, &zero, &zero);
        scale_cells(&mut f_yt, nv, &v.iter().map(|v| eps * v).collect::<Vec<_>>());

        // f_ττ = ε (F'(f)[∂t f] + u1 ∂X F(f)) with F(f) = D_t f
        let ft = self.rhs(f)?;
        let h = Self::step_size(&f.values, &ft);
        let mut f_tt = if h > 0.0 {
            let fp = self.material(&self.field(f, Self::step(&f.values, &ft, h)))?;
            let fm = self.material(&self.field(f, Self::step(&f.values, &ft, -h)))?;
            (0..fp.len()).map(|k| (fp[k] - fm[k]) / (2.0 * h)).collect()
        } else {
            vec![0.0; ft.len()]
        };
        let mut adv = d_x(&dt_f, nv, f.dx, &zero, &zero);
        scale_cells(&mut adv, nv, &cell_velocity(&f.values, self.grid));
        f_tt.iter_mut().zip(&adv).for_each(|(a, b)| *a = eps * (*a + b));

        Ok(DerivativeNorms {
            g_y: self.weighted_norm(&g_y, dy),
            g_tau: self.weighted_norm(&g_tau, dy),
            f_yy: self.weighted_norm(&f_yy, dy),
            f_ytau: self.weighted_norm(&f_yt, dy),
            f_tautau: self.weighted_norm(&f_tt, dy),
        })
    }
}

/// Weighted sum of the six energy components.
pub fn energy_e6(
    perturbation: &PerturbationFields,
    g: &GFields,
    derivatives: &DerivativeNorms,
    dy: &[f64],
    mstar: &[f64],
    grid: &VelocityGrid,
    weights: &[f64; 6],
) -> Result<EnergyRow> {
    let n = perturbation.y.len();
    check_len(n, dy.len())?;
    if perturbation.big_phi.len() != n || perturbation.w.len() != n {
        return Err(Error::Precondition("antiderivatives have not been computed".into()));
    }
    check_len(n * grid.len(), g.g1.len())?;
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(invalid("weights", "energy weights must be nonnegative"));
    }
    let eps = perturbation.epsilon;
    let sq3 = |a: &[f64; 3]| a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    let y = &perturbation.y;
    let grads: Vec<Vec<f64>> = [
        perturbation.phi.clone(),
        perturbation.zeta.clone(),
        perturbation.psi.iter().map(|p| p[0]).collect(),
        perturbation.psi.iter().map(|p| p[1]).collect(),
        perturbation.psi.iter().map(|p| p[2]).collect(),
    ]
    .iter()
    .map(|q| gradient_nonuniform(y, q))
    .collect();
    let mut c = [0.0; 6];
    for i in 0..n {
        let p = perturbation;
        c[0] += dy[i] * (p.big_phi[i].powi(2) + sq3(&p.big_psi[i]) + p.w[i].powi(2));
        c[1] += dy[i] * (p.phi[i].powi(2) + sq3(&p.psi[i]) + p.zeta[i].powi(2));
        c[2] += eps * dy[i] * grads.iter().map(|g| g[i] * g[i]).sum::<f64>();
    }
    let nv = grid.len();
    c[3] = g
        .g1
        .par_chunks(nv)
        .zip(dy.par_iter())
        .map(|(slot, d)| d * slot.iter().zip(mstar).zip(grid.weights()).map(|((g, m), w)| w * g * g / m).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    c[4] = eps * (derivatives.g_y + derivatives.g_tau);
    c[5] = eps * (derivatives.f_yy + derivatives.f_ytau + derivatives.f_tautau);
    let e6 = c.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
    let t = perturbation.tau * eps.sqrt();
    Ok(EnergyRow { t, tau: perturbation.tau, components: c, e6, growth_ratio: e6 / (1.0 + t).sqrt() })
}

/// Energy of one kinetic snapshot against the wave. BGK only: the time
/// derivatives are taken from the BGK right-hand side.
pub fn snapshot_energy(
    snapshot: &KineticSnapshot,
    traj: &KineticTrajectory,
    grid: &VelocityGrid,
    weights: &[f64; 6],
) -> Result<(EnergyRow, LagrangianView)> {
    let config = &traj.config;
    if config.model.kind != CollisionKind::Bgk {
        return Err(Error::Precondition("energy time derivatives are implemented for BGK only".into()));
    }
    let eps = config.epsilon;
    let view = lagrangian_view(snapshot, &traj.profile, eps)?;
    let mut pert = perturbation_from_view(&view)?;
    antiderivatives(&mut pert, &view.wave, LEFT_TAIL_TOL)?;
    let nu0 = config.model.nu0;
    let g = micro_decomposition_g(&snapshot.f, grid, &view, MicroInverse::Bgk { nu0 })?;
    let (l, r) = config.far_field();
    let left = discrete_maxwellian(&l, grid)?;
    let right = discrete_maxwellian(&r, grid)?;
    let mstar = config.mstar().slice(grid)?;
    let dy = view.dy_weights();
    let ctx = DerivativeContext { grid, epsilon: eps, nu0, left: &left, right: &right, mstar: &mstar };
    let norms = ctx.norms(&snapshot.f, &view.v, &dy)?;
    let row = energy_e6(&pert, &g, &norms, &dy, &mstar, grid, weights)?;
    Ok((row, view))
}

/// Energy trace over every snapshot of a run.
pub fn energy_report(traj: &KineticTrajectory, weights: &[f64; 6]) -> Result<EnergyReport> {
    let grid = traj.config.velocity_grid()?;
    let rows = traj
        .snapshots
        .iter()
        .map(|s| snapshot_energy(s, traj, &grid, weights).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyReport { epsilon: traj.config.epsilon, delta: traj.config.delta(), weights: *weights, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub passed: bool,
    /// `max_τ E6(τ) / ((E6(0) + δ)(1 + √ε τ)^{1/2})`.
    pub max_ratio: f64,
    pub slack: f64,
    /// Fit of `log E6` against `log(1 + √ε τ)`, when the trace allows one.
    pub exponent_fit: Option<LineFit>,
    pub max_exponent: f64,
}

pub const DEFAULT_GROWTH_SLACK: f64 = 5.0;
pub const MAX_GROWTH_EXPONENT: f64 = 0.6;

/// Checks `E6(τ) ≤ C (E6(0) + δ)(1 + √ε τ)^{1/2}` and that the fitted growth
/// exponent stays at most `0.6`.
pub fn growth_check(report: &EnergyReport, slack: f64) -> Result<GrowthCheck> {
    if report.rows.is_empty() {
        return Err(Error::Precondition("energy trace is empty".into()));
    }
    let mut rows = report.rows.clone();
    rows.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite times"));
    let base = rows[0].e6 + report.delta;
    let mut max_ratio = 0.0f64;
    for r in &rows {
        let denom = base * (1.0 + r.t).sqrt();
        let ratio = if denom > 0.0 {
            r.e6 / denom
        } else if r.e6 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_ratio = max_ratio.max(ratio);
    }
    let usable: Vec<&EnergyRow> = rows.iter().filter(|r| r.e6 > 0.0).collect();
    let exponent_fit = if usable.len() >= 2 && usable.iter().any(|r| r.t != usable[0].t) {
        let x: Vec<f64> = usable.iter().map(|r| (1.0 + r.t).ln()).collect();
        let y: Vec<f64> = usable.iter().map(|r| r.e6.ln()).collect();
        Some(fit_line(&x, &y)?)
    } else {
        None
    };
    let exponent_ok = exponent_fit.map_or(true, |f| f.slope <= MAX_GROWTH_EXPONENT);
    Ok(GrowthCheck {
        passed: max_ratio <= slack && exponent_ok,
        max_ratio,
        slack,
        exponent_fit,
        max_exponent: MAX_GROWTH_EXPONENT,
    })
}
