//! Discrete-velocity solver for `f_t + ξ1 f_X = Q(f, f)/ε` on a bounded
//! Eulerian interval, Strang split into transport and collision.
//!
//! Ghost cells hold the far-field Maxwellians. Every face flux is accumulated
//! into a ledger, so the totals of the five invariants can be checked against
//! what entered through the boundary. The mass crossing `X = 0` is tracked as
//! well; it fixes the Lagrangian labels of the kinetic solution.

mod snapshot;

pub use snapshot::{read_snapshot, write_snapshot, SnapshotHeader, SNAPSHOT_FORMAT};

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{
    build_linearized, CollisionKind, CollisionModel, HardSphereKernel, LinearizedOperator, TransportTable,
};
use crate::contact_wave::{eulerian_wave, solve_selfsimilar, EulerianWave, SelfSimilarOptions, SelfSimilarProfile};
use crate::error::{check_len, invalid, Error, Result};
use crate::micromacro::{discrete_maxwellian, local_basis, GlobalMaxwellian};
use crate::numerics::minmod;
use crate::velocity::{
    moments_unchecked, primitive_from_conserved, DistributionField, Frame, Primitive, VelocityGrid, GAS_CONSTANT,
};

/// Largest admissible transport CFL number.
pub const MAX_CFL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportScheme {
    /// First-order upwind; keeps `f ≥ 0`.
    Upwind,
    /// Second-order upwind with minmod-limited slopes. May undershoot.
    Minmod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticConfig {
    pub epsilon: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub v_minus: f64,
    /// Cells on `[-half_width, half_width]`; must be even so `X = 0` is a face.
    pub nx: usize,
    pub half_width: f64,
    pub velocity_counts: [usize; 3],
    pub extent_multiplier: f64,
    pub model: CollisionModel,
    pub t_final: f64,
    pub snapshots: Vec<f64>,
    pub cfl: f64,
    pub transport: TransportScheme,
    /// Steps between rebuilds of the frozen hard-sphere operator.
    pub refresh_interval: usize,
    /// Temperatures at which the transport coefficients are tabulated.
    pub table_nodes: usize,
    pub profile: SelfSimilarOptions,
    /// Reference Maxwellian of the weighted norms; defaults from the far field.
    pub mstar: Option<GlobalMaxwellian>,
}

impl KineticConfig {
    /// BGK setup used by the convergence sweep.
    pub fn bgk(epsilon: f64, theta_minus: f64, theta_plus: f64) -> Self {
        Self {
            epsilon,
            theta_minus,
            theta_plus,
            v_minus: 1.0,
            nx: 400,
            half_width: 8.0,
            velocity_counts: [16, 12, 12],
            extent_multiplier: 6.0,
            model: CollisionModel::bgk(1.0).expect("unit frequency is valid"),
            t_final: 2.0,
            snapshots: vec![0.25, 0.5, 1.0, 2.0],
            cfl: MAX_CFL,
            transport: TransportScheme::Minmod,
            refresh_interval: 10,
            table_nodes: 9,
            profile: SelfSimilarOptions::default(),
            mstar: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("epsilon", self.epsilon),
            ("theta_minus", self.theta_minus),
            ("theta_plus", self.theta_plus),
            ("v_minus", self.v_minus),
            ("half_width", self.half_width),
            ("extent_multiplier", self.extent_multiplier),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(invalid(name, format!("must be positive, got {value}")));
            }
        }
        if self.nx < 4 || self.nx % 2 != 0 {
            return Err(invalid("nx", format!("must be even and at least 4, got {}", self.nx)));
        }
        if !(self.t_final >= 0.0) {
            return Err(invalid("t_final", "must be nonnegative"));
        }
        if let Some(s) = self.snapshots.iter().find(|s| !(**s >= 0.0 && **s <= self.t_final)) {
            return Err(invalid("snapshots", format!("time {s} lies outside [0, t_final = {}]", self.t_final)));
        }
        if !(self.cfl > 0.0 && self.cfl <= MAX_CFL) {
            return Err(invalid("cfl", format!("must lie in (0, {MAX_CFL}], got {}", self.cfl)));
        }
        if self.refresh_interval == 0 {
            return Err(invalid("refresh_interval", "must be at least 1"));
        }
        self.model.validate()?;
        self.profile.validate()?;
        self.mstar().check_window_range(self.theta_minus.min(self.theta_plus), self.theta_minus.max(self.theta_plus))
    }

    pub fn p_plus(&self) -> f64 {
        GAS_CONSTANT * self.theta_minus / self.v_minus
    }

    pub fn v_plus(&self) -> f64 {
        self.v_minus * self.theta_plus / self.theta_minus
    }

    pub fn delta(&self) -> f64 {
        (self.theta_plus - self.theta_minus).abs()
    }

    pub fn mstar(&self) -> GlobalMaxwellian {
        self.mstar.unwrap_or_else(|| {
            GlobalMaxwellian::default_for(1.0 / self.v_minus, 1.0 / self.v_plus(), self.theta_minus, self.theta_plus)
        })
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.velocity_counts, self.extent_multiplier, self.theta_minus.max(self.theta_plus))
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.nx as f64
    }

    /// Cell centers.
    pub fn cells(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nx).map(|i| -self.half_width + (i as f64 + 0.5) * dx).collect()
    }

    pub fn far_field(&self) -> (Primitive, Primitive) {
        (
            Primitive::at_rest(1.0 / self.v_minus, self.theta_minus),
            Primitive::at_rest(1.0 / self.v_plus(), self.theta_plus),
        )
    }

    /// Transport coefficients over the temperature range of the data.
    pub fn transport_table(&self, grid: &VelocityGrid) -> Result<TransportTable> {
        let (lo, hi) = (self.theta_minus.min(self.theta_plus), self.theta_minus.max(self.theta_plus));
        TransportTable::for_model(&self.model, self.p_plus(), lo, hi, self.table_nodes, grid)
    }

    pub fn wave_profile(&self, table: &TransportTable) -> Result<SelfSimilarProfile> {
        solve_selfsimilar(self.theta_minus, self.theta_plus, self.p_plus(), &|t| table.lambda(t), &self.profile)
    }
}

/// Cell-wise Maxwellian of the wave state.
pub fn init_from_wave(wave: &EulerianWave, grid: &VelocityGrid) -> Result<DistributionField> {
    let n = wave.xe.len();
    if n < 2 {
        return Err(invalid("wave", "need at least two cells"));
    }
    let dx = wave.xe[1] - wave.xe[0];
    let mut f = DistributionField::zeros(wave.xe.clone(), dx, grid.len(), Frame::Eulerian);
    f.values.par_chunks_mut(grid.len()).enumerate().try_for_each(|(i, slot)| -> Result<()> {
        let state = Primitive::new(wave.rho[i], wave.u[i], wave.theta[i])?;
        slot.copy_from_slice(&discrete_maxwellian(&state, grid)?);
        Ok(())
    })?;
    Ok(f)
}

/// Running totals and boundary inflow of `(ρ, ρu, ρE)` integrated over `X`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantLedger {
    pub totals: [f64; 5],
    pub inflow: [f64; 5],
    /// Mass that has crossed `X = 0` in the positive direction.
    pub mass_through_origin: f64,
}

impl InvariantLedger {
    /// Imbalance of quantity `a` since `start`, relative to its initial total.
    pub fn relative_drift(&self, start: &InvariantLedger, a: usize) -> f64 {
        let change = self.totals[a] - start.totals[a] - (self.inflow[a] - start.inflow[a]);
        change.abs() / start.totals[a].abs().max(f64::MIN_POSITIVE)
    }
}

fn cell_invariants(f: &[f64], grid: &VelocityGrid) -> [f64; 5] {
    moments_unchecked(f, grid).as_array()
}

fn totals(f: &DistributionField, grid: &VelocityGrid) -> [f64; 5] {
    let mut t = [0.0; 5];
    for i in 0..f.nx() {
        let m = cell_invariants(f.slice(i), grid);
        for a in 0..5 {
            t[a] += m[a] * f.dx;
        }
    }
    t
}

/// Frozen hard-sphere operator `L_ref` with the factorization of
/// `I − (dt/ε) L_ref` in the scaled variable.
struct HardSphereStepper {
    kernel: HardSphereKernel,
    op: LinearizedOperator,
    lu: Option<(f64, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
    age: usize,
}

impl HardSphereStepper {
    fn factor(&mut self, c: f64) -> Result<()> {
        if matches!(self.lu, Some((cached, _)) if cached == c) {
            return Ok(());
        }
        let a =
            self.op.scaled_matrix().ok_or_else(|| Error::Precondition("hard-sphere operator has no matrix".into()))?;
        let n = a.nrows();
        let m = DMatrix::identity(n, n) - a * c;
        self.lu = Some((c, m.lu()));
        Ok(())
    }
}

/// Full solver state.
pub struct KineticState {
    pub f: DistributionField,
    pub grid: VelocityGrid,
    pub epsilon: f64,
    pub model: CollisionModel,
    pub scheme: TransportScheme,
    pub t: f64,
    pub steps: usize,
    pub ledger: InvariantLedger,
    left: Vec<f64>,
    right: Vec<f64>,
    refresh_interval: usize,
    hs: Option<HardSphereStepper>,
}

impl KineticState {
    pub fn new(
        f: DistributionField,
        grid: VelocityGrid,
        epsilon: f64,
        model: CollisionModel,
        scheme: TransportScheme,
        far_field: (Primitive, Primitive),
        refresh_interval: usize,
    ) -> Result<Self> {
        f.validate()?;
        check_len(grid.len(), f.nv)?;
        if f.nx() % 2 != 0 {
            return Err(invalid("nx", "must be even so that X = 0 is a cell face"));
        }
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        model.validate()?;
        let left = discrete_maxwellian(&far_field.0, &grid)?;
        let right = discrete_maxwellian(&far_field.1, &grid)?;
        let ledger = InvariantLedger { totals: totals(&f, &grid), ..Default::default() };
        Ok(Self {
            f,
            grid,
            epsilon,
            model,
            scheme,
            t: 0.0,
            steps: 0,
            ledger,
            left,
            right,
            refresh_interval: refresh_interval.max(1),
            hs: None,
        })
    }

    pub fn max_dt(&self) -> f64 {
        MAX_CFL * self.f.dx / self.grid.xi1_max()
    }

    pub fn far_field_slices(&self) -> (&[f64], &[f64]) {
        (&self.left, &self.right)
    }

    /// `(ρ, u, θ)` per cell.
    pub fn primitives(&self) -> Result<Vec<Primitive>> {
        (0..self.f.nx()).map(|i| primitive_from_conserved(&moments_unchecked(self.f.slice(i), &self.grid))).collect()
    }

    fn mean_state(&self) -> Result<Primitive> {
        let t = totals(&self.f, &self.grid);
        let len = self.f.dx * self.f.nx() as f64;
        primitive_from_conserved(&crate::velocity::FluidMoments::from_array(t.map(|v| v / len)))
    }

    /// Advances `f` by `dt` with transport over `ξ1` only.
    fn transport(&mut self, dt: f64) {
        let nx = self.f.nx();
        let nv = self.grid.len();
        let dx = self.f.dx;
        let xi1: Vec<f64> = self.grid.nodes().iter().map(|n| n[0]).collect();
        let f = &self.f;
        let (left, right) = (&self.left, &self.right);
        // extended cell j ↔ physical cell j − 2
        let cell = |j: usize| -> &[f64] {
            if j < 2 {
                left
            } else if j >= nx + 2 {
                right
            } else {
                f.slice(j - 2)
            }
        };
        let limited = self.scheme == TransportScheme::Minmod;
        let mut flux = vec![0.0; (nx + 1) * nv];
        flux.par_chunks_mut(nv).enumerate().for_each(|(face, out)| {
            // face between extended cells face + 1 and face + 2
            let (a, b) = (face + 1, face + 2);
            let (fa, fb) = (cell(a), cell(b));
            let (fam, fbp) = (cell(a - 1), cell(b + 1));
            for k in 0..nv {
                let s = xi1[k];
                let nu = (s * dt / dx).abs();
                out[k] = if s >= 0.0 {
                    let slope = if limited { minmod(fa[k] - fam[k], fb[k] - fa[k]) } else { 0.0 };
                    s * (fa[k] + 0.5 * (1.0 - nu) * slope)
                } else {
                    let slope = if limited { minmod(fb[k] - fa[k], fbp[k] - fb[k]) } else { 0.0 };
                    s * (fb[k] - 0.5 * (1.0 - nu) * slope)
                };
            }
        });
        let r = dt / dx;
        self.f.values.par_chunks_mut(nv).enumerate().for_each(|(i, slot)| {
            let (lo, hi) = (&flux[i * nv..(i + 1) * nv], &flux[(i + 1) * nv..(i + 2) * nv]);
            for k in 0..nv {
                slot[k] -= r * (hi[k] - lo[k]);
            }
        });
        let face_moments = |face: usize| cell_invariants(&flux[face * nv..(face + 1) * nv], &self.grid);
        let (fl, fr, f0) = (face_moments(0), face_moments(nx), face_moments(nx / 2));
        for a in 0..5 {
            self.ledger.inflow[a] += dt * (fl[a] - fr[a]);
        }
        self.ledger.mass_through_origin += dt * f0[0];
    }

    /// Exact BGK relaxation `f ← M + (f − M) e^{−ν0 dt/ε}` cell by cell.
    fn collide_bgk(&mut self, dt: f64) -> Result<()> {
        let decay = (-self.model.nu0 * dt / self.epsilon).exp();
        let grid = &self.grid;
        self.f.values.par_chunks_mut(grid.len()).try_for_each(|slot| -> Result<()> {
            let state = primitive_from_conserved(&moments_unchecked(slot, grid))?;
            let m = discrete_maxwellian(&state, grid)?;
            for (v, mk) in slot.iter_mut().zip(&m) {
                *v = mk + (*v - mk) * decay;
            }
            Ok(())
        })
    }

    /// Backward Euler in the frozen linear part, explicit remainder:
    /// `(I − c L_ref) g⁺ = g + c (Q(f,f) − Q(M,M) − L_ref g)`, `g = f − M[f]`, `c = dt/ε`.
    fn collide_hard_sphere(&mut self, dt: f64) -> Result<()> {
        let stale = match &self.hs {
            None => true,
            Some(h) => h.age >= self.refresh_interval,
        };
        if stale {
            let reference = self.mean_state()?;
            let op = build_linearized(&reference, &self.grid, &self.model)?;
            let kernel = HardSphereKernel::new(&self.grid, &self.model.angular)?;
            self.hs = Some(HardSphereStepper { kernel, op, lu: None, age: 0 });
        }
        let c = dt / self.epsilon;
        let grid = &self.grid;
        let hs = self.hs.as_mut().expect("stepper initialized above");
        hs.factor(c)?;
        hs.age += 1;
        let hs = &*hs;
        let scale = hs.op.scaling();
        let lu = &hs.lu.as_ref().expect("factored above").1;
        self.f.values.par_chunks_mut(grid.len()).try_for_each(|slot| -> Result<()> {
            let state = primitive_from_conserved(&moments_unchecked(slot, grid))?;
            let m = discrete_maxwellian(&state, grid)?;
            let g: Vec<f64> = slot.iter().zip(&m).map(|(a, b)| a - b).collect();
            // Q(M, M) vanishes only up to quadrature error; removing it keeps
            // the discrete Maxwellian an exact equilibrium
            let q = hs.kernel.evaluate(slot, slot, grid)?.values;
            let q_eq = hs.kernel.evaluate(&m, &m, grid)?.values;
            let q: Vec<f64> = q.iter().zip(&q_eq).map(|(a, b)| a - b).collect();
            let lg = hs.op.apply(&g)?;
            let rhs = DVector::from_iterator(g.len(), (0..g.len()).map(|k| (g[k] + c * (q[k] - lg[k])) * scale[k]));
            let y = lu.solve(&rhs).ok_or_else(|| Error::Singular("implicit collision matrix is singular".into()))?;
            for k in 0..slot.len() {
                slot[k] = m[k] + y[k] / scale[k];
            }
            Ok(())
        })
    }

    fn collide(&mut self, dt: f64) -> Result<()> {
        match self.model.kind {
            CollisionKind::Bgk => self.collide_bgk(dt),
            CollisionKind::HardSphere => self.collide_hard_sphere(dt),
        }
    }

    fn refresh_totals(&mut self) {
        self.ledger.totals = totals(&self.f, &self.grid);
    }

    /// `∫∫ |P1 f|² / M* dξ dX` with `P1` taken against each cell's own moments.
    pub fn micro_norm(&self, mstar: &GlobalMaxwellian) -> Result<f64> {
        let ms = mstar.slice(&self.grid)?;
        let grid = &self.grid;
        let per_cell: Vec<f64> = self
            .f
            .values
            .par_chunks(grid.len())
            .map(|slot| -> Result<f64> {
                let g = local_basis(slot, grid)?.p1(slot, grid);
                Ok(g.iter().zip(&ms).zip(grid.weights()).map(|((g, m), w)| w * g * g / m).sum())
            })
            .collect::<Result<_>>()?;
        Ok(per_cell.iter().sum::<f64>() * self.f.dx)
    }
}

/// One Strang step: transport `dt/2`, collision `dt`, transport `dt/2`.
pub fn kinetic_step(state: &mut KineticState, dt: f64) -> Result<()> {
    let limit = state.max_dt();
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Stability(format!("dt = {dt:.4e} exceeds CFL limit {limit:.4e}")));
    }
    state.transport(0.5 * dt);
    state.collide(dt)?;
    state.transport(0.5 * dt);
    state.t += dt;
    state.steps += 1;
    state.refresh_totals();
    Ok(())
}

/// Collision substep alone; exposed for conservation checks.
pub fn collision_substep(state: &mut KineticState, dt: f64) -> Result<()> {
    state.collide(dt)?;
    state.refresh_totals();
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
}

impl MomentProfile {
    fn from_state(state: &KineticState) -> Result<Self> {
        let p = state.primitives()?;
        Ok(Self {
            x: state.f.x.clone(),
            rho: p.iter().map(|s| s.rho).collect(),
            u: p.iter().map(|s| s.u).collect(),
            theta: p.iter().map(|s| s.theta).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticSnapshot {
    pub t: f64,
    pub f: DistributionField,
    pub moments: MomentProfile,
    pub ledger: InvariantLedger,
    pub micro_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticTrajectory {
    pub config: KineticConfig,
    pub profile: SelfSimilarProfile,
    pub snapshots: Vec<KineticSnapshot>,
    pub initial_ledger: InvariantLedger,
    pub steps: usize,
    /// `(t, ∫∫|P1 f|²/M*)` at every snapshot.
    pub micro_trace: Vec<(f64, f64)>,
    pub negative_values: usize,
}

impl KineticTrajectory {
    /// Largest relative mass imbalance over the recorded snapshots.
    pub fn mass_drift(&self) -> f64 {
        self.snapshots.iter().map(|s| s.ledger.relative_drift(&self.initial_ledger, 0)).fold(0.0, f64::max)
    }
}

/// Builds the wave, initializes `f` with its Maxwellian and integrates,
/// landing exactly on every snapshot time.
pub fn kinetic_run(config: &KineticConfig) -> Result<KineticTrajectory> {
    config.validate()?;
    let grid = config.velocity_grid()?;
    let table = config.transport_table(&grid)?;
    let profile = config.wave_profile(&table)?;
    kinetic_run_with_profile(config, &grid, profile)
}

pub fn kinetic_run_with_profile(
    config: &KineticConfig,
    grid: &VelocityGrid,
    profile: SelfSimilarProfile,
) -> Result<KineticTrajectory> {
    config.validate()?;
    let wave = eulerian_wave(&profile, config.epsilon, 0.0, &config.cells())?;
    let f = init_from_wave(&wave, grid)?;
    let mut state = KineticState::new(
        f,
        grid.clone(),
        config.epsilon,
        config.model.clone(),
        config.transport,
        config.far_field(),
        config.refresh_interval,
    )?;
    let mstar = config.mstar();
    let initial_ledger = state.ledger;
    let mut times = config.snapshots.clone();
    times.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    times.dedup();
    let dt_max = config.cfl * config.dx() / grid.xi1_max();
    let mut snapshots = Vec::with_capacity(times.len());
    let mut micro_trace = Vec::with_capacity(times.len());
    let mut negative = 0;
    for target in times {
        while state.t < target - 1e-12 {
            let remaining = target - state.t;
            // split the remaining interval evenly to avoid a sliver step
            let n = (remaining / dt_max).ceil().max(1.0);
            kinetic_step(&mut state, remaining / n)?;
            negative = negative.max(state.f.negative_count());
        }
        state.t = target;
        let micro = state.micro_norm(&mstar)?;
        micro_trace.push((target, micro));
        snapshots.push(KineticSnapshot {
            t: target,
            f: state.f.clone(),
            moments: MomentProfile::from_state(&state)?,
            ledger: state.ledger,
            micro_norm: micro,
        });
    }
    Ok(KineticTrajectory {
        config: config.clone(),
        profile,
        snapshots,
        initial_ledger,
        steps: state.steps,
        micro_trace,
        negative_values: negative,
    })
}

/// Right-hand side `−ξ1 ∂X f + Q(f)/ε` with centered differences in `X` and
/// the far-field slices beyond the ends; BGK only.
pub fn bgk_rhs(
    f: &DistributionField,
    grid: &VelocityGrid,
    epsilon: f64,
    nu0: f64,
    far_field: (&[f64], &[f64]),
) -> Result<DistributionField> {
    let nv = grid.len();
    let nx = f.nx();
    let mut out = f.clone();
    let xi1: Vec<f64> = grid.nodes().iter().map(|n| n[0]).collect();
    out.values.par_chunks_mut(nv).enumerate().try_for_each(|(i, slot)| -> Result<()> {
        let fm = if i == 0 { far_field.0 } else { f.slice(i - 1) };
        let fp = if i + 1 == nx { far_field.1 } else { f.slice(i + 1) };
        let fi = f.slice(i);
        let state = primitive_from_conserved(&moments_unchecked(fi, grid))?;
        let m = discrete_maxwellian(&state, grid)?;
        for k in 0..nv {
            slot[k] = -xi1[k] * (fp[k] - fm[k]) / (2.0 * f.dx) + nu0 / epsilon * (m[k] - fi[k]);
        }
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests;
