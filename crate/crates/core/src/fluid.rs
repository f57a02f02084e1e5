//! Finite-volume solver for the Lagrangian Navier–Stokes-type system
//!
//! ```text
//! v_t − u1_x = 0
//! u1_t + p_x = (4ε/3)(μ u1_x / v)_x
//! ui_t       = ε(μ ui_x / v)_x,                   i = 2, 3
//! E_t + (p u1)_x = ε(λ θ_x / v)_x + (4ε/3)(μ u1 u1_x / v)_x + ε Σ(μ ui ui_x / v)_x
//! ```
//!
//! with `E = θ + |u|²/2` and `p = Rθ/v`. Steps are Strang split: a half step
//! of implicit diffusion, a full SSP-RK3 step of the inviscid part with central
//! fluxes, another half step of diffusion. Both substeps are in flux form, so
//! the three conserved sums change only through the boundary fluxes, which
//! are accumulated in a ledger.

use serde::{Deserialize, Serialize};

use crate::collision::TransportTable;
use crate::contact_wave::{build_wave, SelfSimilarProfile};
use crate::error::{invalid, Error, Result};
use crate::numerics::solve_tridiagonal;
use crate::velocity::{Frame, GAS_CONSTANT};

/// Far-field Dirichlet state `(v, u, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    pub v: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

impl FarField {
    pub fn energy(&self) -> f64 {
        self.theta + 0.5 * (self.u[0] * self.u[0] + self.u[1] * self.u[1] + self.u[2] * self.u[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidField {
    pub frame: Frame,
    /// Cell centers of a uniform Lagrangian grid.
    pub x: Vec<f64>,
    pub dx: f64,
    pub t: f64,
    pub epsilon: f64,
    pub v: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
    pub left: FarField,
    pub right: FarField,
}

/// Sums of the conserved quantities times `dx`, and the net boundary inflow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationLedger {
    pub volume: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub inflow_volume: f64,
    pub inflow_momentum: [f64; 3],
    pub inflow_energy: f64,
}

impl ConservationLedger {
    /// Largest imbalance between the change of the totals and the boundary
    /// inflow since `start`.
    pub fn drift_since(&self, start: &ConservationLedger) -> f64 {
        let mut worst = (self.volume - start.volume - (self.inflow_volume - start.inflow_volume)).abs();
        for a in 0..3 {
            worst = worst.max(
                (self.momentum[a] - start.momentum[a] - (self.inflow_momentum[a] - start.inflow_momentum[a])).abs(),
            );
        }
        worst.max((self.energy - start.energy - (self.inflow_energy - start.inflow_energy)).abs())
    }
}

impl FluidField {
    pub fn new(x: Vec<f64>, v: Vec<f64>, u: Vec<[f64; 3]>, theta: Vec<f64>, epsilon: f64) -> Result<Self> {
        let n = x.len();
        if n < 4 {
            return Err(invalid("x", "need at least four cells"));
        }
        if v.len() != n || u.len() != n || theta.len() != n {
            return Err(Error::ShapeMismatch { expected: n, found: v.len().min(u.len()).min(theta.len()) });
        }
        let dx = x[1] - x[0];
        if !(dx > 0.0) || x.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx) {
            return Err(invalid("x", "grid must be uniform and increasing"));
        }
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        let left = FarField { v: v[0], u: u[0], theta: theta[0] };
        let right = FarField { v: v[n - 1], u: u[n - 1], theta: theta[n - 1] };
        let f = Self { frame: Frame::Lagrangian, x, dx, t: 0.0, epsilon, v, u, theta, left, right };
        f.check_physical()?;
        Ok(f)
    }

    /// Wave initial data on `n` cells covering `[-half_width, half_width]`.
    pub fn from_wave(profile: &SelfSimilarProfile, epsilon: f64, t: f64, half_width: f64, n: usize) -> Result<Self> {
        let dx = 2.0 * half_width / n as f64;
        let x: Vec<f64> = (0..n).map(|i| -half_width + (i as f64 + 0.5) * dx).collect();
        let w = build_wave(profile, epsilon, t, &x)?;
        let mut f = Self::new(x, w.vbar, w.ubar, w.thetabar, epsilon)?;
        let k = 2.0 / (3.0 * profile.p_plus);
        f.left = FarField { v: k * profile.theta_minus, u: [0.0; 3], theta: profile.theta_minus };
        f.right = FarField { v: k * profile.theta_plus, u: [0.0; 3], theta: profile.theta_plus };
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn pressure(&self, i: usize) -> f64 {
        GAS_CONSTANT * self.theta[i] / self.v[i]
    }

    pub fn energy(&self, i: usize) -> f64 {
        let u = self.u[i];
        self.theta[i] + 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
    }

    fn check_physical(&self) -> Result<()> {
        for i in 0..self.len() {
            if !(self.v[i] > 0.0) || !(self.theta[i] > 0.0) || !self.v[i].is_finite() || !self.theta[i].is_finite() {
                return Err(Error::NonPhysical(format!(
                    "vacuum or non-finite state at x = {:.4}, t = {:.4}: v = {}, theta = {}",
                    self.x[i], self.t, self.v[i], self.theta[i]
                )));
            }
        }
        Ok(())
    }

    pub fn totals(&self) -> ConservationLedger {
        let mut l = ConservationLedger::default();
        for i in 0..self.len() {
            l.volume += self.v[i] * self.dx;
            for a in 0..3 {
                l.momentum[a] += self.u[i][a] * self.dx;
            }
            l.energy += self.energy(i) * self.dx;
        }
        l
    }

    /// Largest stable step: `min(0.4 dx² v/(ε max(λ, 4μ/3)), 0.5 dx/c)` with
    /// `c² = (5/3) p / v`.
    pub fn max_stable_dt(&self, table: &TransportTable) -> f64 {
        let mut dt = f64::INFINITY;
        for i in 0..self.len() {
            let th = self.theta[i];
            let kappa = table.lambda(th).max(4.0 * table.mu(th) / 3.0);
            dt = dt.min(0.4 * self.dx * self.dx * self.v[i] / (self.epsilon * kappa));
            let c = (5.0 / 3.0 * self.pressure(i) / self.v[i]).sqrt();
            dt = dt.min(0.5 * self.dx / c);
        }
        dt
    }
}

/// Solver state: the field plus the running boundary ledger.
#[derive(Debug, Clone)]
pub struct FluidSolver {
    pub field: FluidField,
    pub table: TransportTable,
    pub ledger: ConservationLedger,
}

type Cons = [f64; 5];

fn cons_of(f: &FluidField, i: usize) -> Cons {
    [f.v[i], f.u[i][0], f.u[i][1], f.u[i][2], f.energy(i)]
}

fn cons_far(s: &FarField) -> Cons {
    [s.v, s.u[0], s.u[1], s.u[2], s.energy()]
}

fn flux(c: &Cons) -> Cons {
    let u1 = c[1];
    let theta = c[4] - 0.5 * (c[1] * c[1] + c[2] * c[2] + c[3] * c[3]);
    let p = GAS_CONSTANT * theta / c[0];
    [-u1, p, 0.0, 0.0, p * u1]
}

impl FluidSolver {
    pub fn new(field: FluidField, table: TransportTable) -> Self {
        let mut ledger = field.totals();
        ledger.inflow_volume = 0.0;
        Self { field, table, ledger }
    }

    fn refresh_totals(&mut self) {
        let t = self.field.totals();
        self.ledger.volume = t.volume;
        self.ledger.momentum = t.momentum;
        self.ledger.energy = t.energy;
    }

    /// Inviscid residual `−(F_{i+½} − F_{i−½})/dx` and the boundary inflow
    /// `F_{−½} − F_{N−½}` it implies.
    fn hyperbolic_rhs(&self, cons: &[Cons], out: &mut [Cons]) -> Cons {
        let n = cons.len();
        let left = flux(&cons_far(&self.field.left));
        let right = flux(&cons_far(&self.field.right));
        let fl: Vec<Cons> = cons.iter().map(flux).collect();
        let face = |i: usize| -> Cons {
            // face between cell i-1 and i, i in 0..=n
            let a = if i == 0 { &left } else { &fl[i - 1] };
            let b = if i == n { &right } else { &fl[i] };
            let mut f = [0.0; 5];
            for q in 0..5 {
                f[q] = 0.5 * (a[q] + b[q]);
            }
            f
        };
        let dx = self.field.dx;
        let mut lo = face(0);
        let first = lo;
        for i in 0..n {
            let hi = face(i + 1);
            for q in 0..5 {
                out[i][q] = -(hi[q] - lo[q]) / dx;
            }
            lo = hi;
        }
        let mut inflow = [0.0; 5];
        for q in 0..5 {
            inflow[q] = first[q] - lo[q];
        }
        inflow
    }

    fn hyperbolic_step(&mut self, dt: f64) -> Result<()> {
        let n = self.field.len();
        let u0: Vec<Cons> = (0..n).map(|i| cons_of(&self.field, i)).collect();
        let mut k = vec![[0.0; 5]; n];
        let mut stage = u0.clone();
        let mut inflow = [0.0; 5];
        // SSP-RK3 (Shu–Osher); the boundary inflow is combined with the
        // same weights as the stages so the ledger stays exact
        let weights = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];
        let mut s1 = vec![[0.0; 5]; n];
        let b = self.hyperbolic_rhs(&stage, &mut k);
        for i in 0..n {
            for q in 0..5 {
                s1[i][q] = u0[i][q] + dt * k[i][q];
            }
        }
        for q in 0..5 {
            inflow[q] += weights[0] * b[q];
        }
        stage.copy_from_slice(&s1);
        let b = self.hyperbolic_rhs(&stage, &mut k);
        let mut s2 = vec![[0.0; 5]; n];
        for i in 0..n {
            for q in 0..5 {
                s2[i][q] = 0.75 * u0[i][q] + 0.25 * (s1[i][q] + dt * k[i][q]);
            }
        }
        for q in 0..5 {
            inflow[q] += weights[1] * b[q];
        }
        stage.copy_from_slice(&s2);
        let b = self.hyperbolic_rhs(&stage, &mut k);
        for i in 0..n {
            for q in 0..5 {
                stage[i][q] = u0[i][q] / 3.0 + 2.0 / 3.0 * (s2[i][q] + dt * k[i][q]);
            }
        }
        for q in 0..5 {
            inflow[q] += weights[2] * b[q];
        }
        for i in 0..n {
            let c = stage[i];
            self.field.v[i] = c[0];
            self.field.u[i] = [c[1], c[2], c[3]];
            self.field.theta[i] = c[4] - 0.5 * (c[1] * c[1] + c[2] * c[2] + c[3] * c[3]);
        }
        self.ledger.inflow_volume += dt * inflow[0];
        for a in 0..3 {
            self.ledger.inflow_momentum[a] += dt * inflow[1 + a];
        }
        self.ledger.inflow_energy += dt * inflow[4];
        self.field.check_physical()
    }

    /// Face coefficients `(μ/v, λ/v)` at the `n + 1` faces, from cell values.
    fn face_coefficients(&self, v: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = v.len();
        let (l, r) = (&self.field.left, &self.field.right);
        let cell = |i: isize| -> (f64, f64) {
            if i < 0 {
                (l.v, l.theta)
            } else if i as usize >= n {
                (r.v, r.theta)
            } else {
                (v[i as usize], theta[i as usize])
            }
        };
        let mut mu = Vec::with_capacity(n + 1);
        let mut lam = Vec::with_capacity(n + 1);
        for f in 0..=n as isize {
            let (va, ta) = cell(f - 1);
            let (vb, tb) = cell(f);
            let (vm, tm) = (0.5 * (va + vb), 0.5 * (ta + tb));
            mu.push(self.table.mu(tm) / vm);
            lam.push(self.table.lambda(tm) / vm);
        }
        (mu, lam)
    }

    /// Crank–Nicolson solve of `w_t = (c w_x)_x` with Dirichlet ghosts `wl`,
    /// `wr`; returns the new values and the time-averaged boundary inflow.
    fn cn_diffuse(w: &[f64], c: &[f64], wl: f64, wr: f64, r: f64) -> Result<(Vec<f64>, f64)> {
        let n = w.len();
        let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let (cl, cr) = (c[i], c[i + 1]);
            let wm = if i == 0 { wl } else { w[i - 1] };
            let wp = if i == n - 1 { wr } else { w[i + 1] };
            rhs[i] = w[i] + 0.5 * r * (cr * (wp - w[i]) - cl * (w[i] - wm));
            diag[i] = 1.0 + 0.5 * r * (cl + cr);
            lower[i] = -0.5 * r * cl;
            upper[i] = -0.5 * r * cr;
        }
        rhs[0] += 0.5 * r * c[0] * wl;
        rhs[n - 1] += 0.5 * r * c[n] * wr;
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
        let half_l = 0.5 * (w[0] + rhs[0]);
        let half_r = 0.5 * (w[n - 1] + rhs[n - 1]);
        let inflow = -c[0] * (half_l - wl) + c[n] * (wr - half_r);
        Ok((rhs, inflow))
    }

    /// Implicit viscous and heat-conduction step in flux form.
    ///
    /// Velocities are advanced first by Crank–Nicolson. Energy is then
    /// updated conservatively with the heat flux at the time-centered
    /// temperature (a tridiagonal solve for `θ^{n+1}`) and the viscous work at
    /// the time-centered velocities. Coefficients are evaluated at the state
    /// predicted by a first pass, which keeps the step second order.
    fn diffusion_step(&mut self, dt: f64) -> Result<()> {
        let v = self.field.v.clone();
        let th0 = self.field.theta.clone();
        let (_, lam0) = self.face_coefficients(&v, &th0);
        let (mu0, _) = self.face_coefficients(&v, &th0);
        let pred = self.diffusion_pass(dt, &mu0, &lam0, false)?;
        let mid: Vec<f64> = th0.iter().zip(&pred).map(|(a, b)| 0.5 * (a + b)).collect();
        let (mu, lam) = self.face_coefficients(&v, &mid);
        self.diffusion_pass(dt, &mu, &lam, true)?;
        self.field.check_physical()
    }

    fn diffusion_pass(&mut self, dt: f64, mu: &[f64], lam: &[f64], commit: bool) -> Result<Vec<f64>> {
        let n = self.field.len();
        let eps = self.field.epsilon;
        let dx = self.field.dx;
        let r = dt / (dx * dx);
        let (l, rt) = (self.field.left, self.field.right);
        let mut u_new = vec![[0.0; 3]; n];
        let mut u_half = vec![[0.0; 3]; n];
        let mut inflow_mom = [0.0; 3];
        for a in 0..3 {
            let scale = if a == 0 { 4.0 / 3.0 } else { 1.0 };
            let c: Vec<f64> = mu.iter().map(|m| scale * eps * m).collect();
            let w: Vec<f64> = self.field.u.iter().map(|u| u[a]).collect();
            let (wn, inflow) = Self::cn_diffuse(&w, &c, l.u[a], rt.u[a], r)?;
            for i in 0..n {
                u_new[i][a] = wn[i];
                u_half[i][a] = 0.5 * (w[i] + wn[i]);
            }
            inflow_mom[a] = inflow * dt / dx;
        }
        // viscous work through the faces at time-centered velocities
        let ucell = |i: isize, a: usize| -> f64 {
            if i < 0 {
                l.u[a]
            } else if i as usize >= n {
                rt.u[a]
            } else {
                u_half[i as usize][a]
            }
        };
        let mut work = vec![0.0; n + 1];
        for (f, w) in work.iter_mut().enumerate() {
            let fi = f as isize;
            for a in 0..3 {
                let scale = if a == 0 { 4.0 / 3.0 } else { 1.0 };
                let (ua, ub) = (ucell(fi - 1, a), ucell(fi, a));
                *w += scale * eps * mu[f] * 0.5 * (ua + ub) * (ub - ua) / dx;
            }
        }
        // E^{n+1}_i = E^n_i + dt/dx [q_{i+½} − q_{i−½} + w_{i+½} − w_{i−½}],
        // q = ελ/v (θ^{n+½}_{i+1} − θ^{n+½}_i)/dx, solved for θ^{n+1}
        let th = &self.field.theta;
        let c: Vec<f64> = lam.iter().map(|m| eps * m).collect();
        let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let (cl, cr) = (c[i], c[i + 1]);
            let tm = if i == 0 { l.theta } else { th[i - 1] };
            let tp = if i == n - 1 { rt.theta } else { th[i + 1] };
            let ke_new = 0.5 * (u_new[i][0].powi(2) + u_new[i][1].powi(2) + u_new[i][2].powi(2));
            let e_old = self.field.energy(i);
            rhs[i] =
                e_old - ke_new + 0.5 * r * (cr * (tp - th[i]) - cl * (th[i] - tm)) + dt / dx * (work[i + 1] - work[i]);
            diag[i] = 1.0 + 0.5 * r * (cl + cr);
            lower[i] = -0.5 * r * cl;
            upper[i] = -0.5 * r * cr;
        }
        rhs[0] += 0.5 * r * c[0] * l.theta;
        rhs[n - 1] += 0.5 * r * c[n] * rt.theta;
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
        if !commit {
            return Ok(rhs);
        }
        let heat_in = -c[0] * (0.5 * (th[0] + rhs[0]) - l.theta) + c[n] * (rt.theta - 0.5 * (th[n - 1] + rhs[n - 1]));
        self.ledger.inflow_energy += dt / dx * heat_in + dt * (work[n] - work[0]);
        for a in 0..3 {
            self.ledger.inflow_momentum[a] += inflow_mom[a];
        }
        self.field.u = u_new;
        self.field.theta = rhs.clone();
        Ok(rhs)
    }
}

/// One Strang-split step `D(dt/2) H(dt) D(dt/2)`.
pub fn ns_step(solver: &mut FluidSolver, dt: f64) -> Result<()> {
    let limit = solver.field.max_stable_dt(&solver.table);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Stability(format!("dt = {dt:.4e} exceeds the stable limit {limit:.4e}")));
    }
    solver.diffusion_step(0.5 * dt)?;
    solver.hyperbolic_step(dt)?;
    solver.diffusion_step(0.5 * dt)?;
    solver.field.t += dt;
    solver.refresh_totals();
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidRunConfig {
    pub t_final: f64,
    pub snapshots: Vec<f64>,
    /// Fraction of the stable step actually used.
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidSnapshot {
    pub field: FluidField,
    pub ledger: ConservationLedger,
    /// Pointwise `max(|v − v̄|, |u1 − ū1|, |θ − θ̄|)` against the evolved wave,
    /// when a profile was supplied.
    pub deviation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidTrajectory {
    pub snapshots: Vec<FluidSnapshot>,
    pub steps: usize,
    /// Largest per-step conservation imbalance.
    pub max_step_drift: f64,
}

fn deviation(field: &FluidField, profile: &SelfSimilarProfile, t0: f64) -> Result<Vec<f64>> {
    let w = build_wave(profile, field.epsilon, t0 + field.t, &field.x)?;
    Ok((0..field.len())
        .map(|i| {
            (field.v[i] - w.vbar[i])
                .abs()
                .max((field.u[i][0] - w.ubar[i][0]).abs())
                .max((field.theta[i] - w.thetabar[i]).abs())
        })
        .collect())
}

/// Runs to `t_final`, landing exactly on each snapshot time. When `wave` is
/// given as `(profile, t0)`, each snapshot records its deviation from the wave
/// evaluated at `t0 + t`.
pub fn ns_run(
    field: FluidField,
    table: TransportTable,
    config: &FluidRunConfig,
    wave: Option<(&SelfSimilarProfile, f64)>,
) -> Result<FluidTrajectory> {
    if !(config.cfl > 0.0 && config.cfl <= 1.0) {
        return Err(invalid("cfl", format!("must lie in (0, 1], got {}", config.cfl)));
    }
    if config.snapshots.iter().any(|s| *s < 0.0 || *s > config.t_final) {
        return Err(invalid("snapshots", "must lie in [0, t_final]"));
    }
    let mut times = config.snapshots.clone();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let mut solver = FluidSolver::new(field, table);
    let mut snapshots = Vec::new();
    let mut steps = 0;
    let mut max_drift = 0.0f64;
    let record = |s: &FluidSolver| -> Result<FluidSnapshot> {
        Ok(FluidSnapshot {
            field: s.field.clone(),
            ledger: s.ledger,
            deviation: match wave {
                Some((p, t0)) => Some(deviation(&s.field, p, t0)?),
                None => None,
            },
        })
    };
    for target in times {
        while solver.field.t < target - 1e-14 {
            let dt = (config.cfl * solver.field.max_stable_dt(&solver.table)).min(target - solver.field.t);
            let before = solver.ledger;
            ns_step(&mut solver, dt)?;
            max_drift = max_drift.max(solver.ledger.drift_since(&before));
            steps += 1;
        }
        solver.field.t = target;
        snapshots.push(record(&solver)?);
    }
    Ok(FluidTrajectory { snapshots, steps, max_step_drift: max_drift })
}

/// Observed order from three runs on `n`, `2n` and `4n` cells with the same
/// step fraction: `log2(‖q_n − q_2n‖₁ / ‖q_2n − q_4n‖₁)`, where finer fields are
/// averaged pairwise onto the coarser cells and `q = (v, u1, θ)`.
pub fn self_convergence_order(
    initial: &dyn Fn(usize) -> Result<FluidField>,
    table: &TransportTable,
    t_final: f64,
    n: usize,
    cfl: f64,
) -> Result<f64> {
    let config = FluidRunConfig { t_final, snapshots: vec![t_final], cfl };
    let mut fields = Vec::new();
    for level in 0..3 {
        let traj = ns_run(initial(n << level)?, table.clone(), &config, None)?;
        fields.push(traj.snapshots.into_iter().next().unwrap().field);
    }
    let coarsen = |f: &FluidField| -> FluidField {
        let m = f.len() / 2;
        let avg = |a: f64, b: f64| 0.5 * (a + b);
        let mut g = f.clone();
        g.x = (0..m).map(|i| avg(f.x[2 * i], f.x[2 * i + 1])).collect();
        g.dx = 2.0 * f.dx;
        g.v = (0..m).map(|i| avg(f.v[2 * i], f.v[2 * i + 1])).collect();
        g.theta = (0..m).map(|i| avg(f.theta[2 * i], f.theta[2 * i + 1])).collect();
        g.u = (0..m)
            .map(|i| {
                let (a, b) = (f.u[2 * i], f.u[2 * i + 1]);
                [avg(a[0], b[0]), avg(a[1], b[1]), avg(a[2], b[2])]
            })
            .collect();
        g
    };
    let dist = |a: &FluidField, b: &FluidField| -> f64 {
        (0..a.len())
            .map(|i| (a.v[i] - b.v[i]).abs() + (a.u[i][0] - b.u[i][0]).abs() + (a.theta[i] - b.theta[i]).abs())
            .sum::<f64>()
            * a.dx
    };
    let e1 = dist(&fields[0], &coarsen(&fields[1]));
    let e2 = dist(&coarsen(&fields[1]), &coarsen(&coarsen(&fields[2])));
    if !(e2 > 0.0) {
        return Err(Error::NonPhysical("runs agree to rounding; order is undefined".into()));
    }
    Ok((e1 / e2).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact_wave::{solve_selfsimilar, SelfSimilarOptions};

    fn table() -> TransportTable {
        TransportTable::constant(2.0 / 3.0, 2.5 * GAS_CONSTANT * 2.0 / 3.0).unwrap()
    }

    fn profile(theta_plus: f64) -> SelfSimilarProfile {
        let t = table();
        solve_selfsimilar(1.0, theta_plus, 2.0 / 3.0, &|th| t.lambda(th), &SelfSimilarOptions::default()).unwrap()
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let n = 64;
        let x: Vec<f64> = (0..n).map(|i| -1.0 + (i as f64 + 0.5) / 32.0).collect();
        let f = FluidField::new(x, vec![1.3; n], vec![[0.0; 3]; n], vec![1.1; n], 0.05).unwrap();
        let traj =
            ns_run(f.clone(), table(), &FluidRunConfig { t_final: 0.3, snapshots: vec![0.3], cfl: 0.9 }, None).unwrap();
        let g = &traj.snapshots[0].field;
        for i in 0..n {
            assert!((g.v[i] - 1.3).abs() < 1e-14 && (g.theta[i] - 1.1).abs() < 1e-14 && g.u[i][0].abs() < 1e-14);
        }
    }

    #[test]
    fn step_conserves_up_to_boundary_flux() {
        let f = FluidField::from_wave(&profile(1.2), 0.05, 0.0, 2.0, 200).unwrap();
        let mut s = FluidSolver::new(f, table());
        for _ in 0..20 {
            let before = s.ledger;
            let dt = 0.9 * s.field.max_stable_dt(&s.table);
            ns_step(&mut s, dt).unwrap();
            assert!(s.ledger.drift_since(&before) < 1e-12, "{}", s.ledger.drift_since(&before));
        }
    }

    #[test]
    fn transverse_velocity_stays_zero() {
        // Riemann data smoothed over four cells
        let n = 200;
        let dx = 4.0 / n as f64;
        let x: Vec<f64> = (0..n).map(|i| -2.0 + (i as f64 + 0.5) * dx).collect();
        let theta: Vec<f64> = x.iter().map(|xi| 1.1 + 0.1 * (xi / (2.0 * dx)).tanh()).collect();
        let v: Vec<f64> = theta.iter().map(|t| t * 1.0).collect();
        let f = FluidField::new(x, v, vec![[0.0; 3]; n], theta, 0.01).unwrap();
        let traj = ns_run(f, table(), &FluidRunConfig { t_final: 0.2, snapshots: vec![0.2], cfl: 0.9 }, None).unwrap();
        let g = &traj.snapshots[0].field;
        assert!(g.u.iter().all(|u| u[1] == 0.0 && u[2] == 0.0));
    }

    #[test]
    fn rejects_unstable_step_and_vacuum() {
        let f = FluidField::from_wave(&profile(1.2), 0.05, 0.0, 2.0, 100).unwrap();
        let mut s = FluidSolver::new(f, table());
        let dt = 2.0 * s.field.max_stable_dt(&s.table);
        assert!(matches!(ns_step(&mut s, dt), Err(Error::Stability(_))));
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert!(FluidField::new(x, vec![-1.0; 8], vec![[0.0; 3]; 8], vec![1.0; 8], 0.1).is_err());
    }

    #[test]
    fn zero_length_run_echoes_initial_state() {
        let f = FluidField::from_wave(&profile(1.2), 0.05, 0.0, 2.0, 100).unwrap();
        let traj =
            ns_run(f.clone(), table(), &FluidRunConfig { t_final: 0.0, snapshots: vec![0.0], cfl: 0.9 }, None).unwrap();
        assert_eq!(traj.steps, 0);
        assert_eq!(traj.snapshots[0].field, f);
    }
    #[test]
    fn smooth_data_converges_at_second_order() {
        let p = profile(1.2);
        let t = table();
        let order = self_convergence_order(&|n| FluidField::from_wave(&p, 0.1, 0.0, 3.0, n), &t, 0.2, 60, 0.9).unwrap();
        assert!(order >= 1.8, "order {order}");
    }
}
