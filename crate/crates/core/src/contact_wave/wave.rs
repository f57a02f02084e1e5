use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::selfsimilar::SelfSimilarProfile;
use crate::collision::TransportTable;
use crate::error::{invalid, Error, Result};
use crate::velocity::{Frame, GAS_CONSTANT};

/// Viscous contact wave sampled on a Lagrangian grid at one time.
///
/// Besides the state `(v̄, ū, θ̄)` the field carries the `x`-derivatives the
/// residuals and the energy diagnostics need; all of them come from the
/// profile tables through the chain rule in `η`, never from differencing in
/// `x` or `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactWaveField {
    pub frame: Frame,
    pub x: Vec<f64>,
    pub t: f64,
    pub epsilon: f64,
    pub p_plus: f64,
    pub delta: f64,
    pub vbar: Vec<f64>,
    pub ubar: Vec<[f64; 3]>,
    pub thetabar: Vec<f64>,
    /// `Θ̂` and its `x`-derivatives.
    pub theta_hat: Vec<f64>,
    pub theta_hat_x: Vec<f64>,
    pub theta_hat_xx: Vec<f64>,
    /// `Θ̂_t` through the self-similar chain rule.
    pub theta_hat_t: Vec<f64>,
    /// `a(Θ̂)`.
    pub diffusivity: Vec<f64>,
    pub u1_x: Vec<f64>,
    pub u1_xx: Vec<f64>,
    pub theta_x: Vec<f64>,
    pub theta_xx: Vec<f64>,
    pub v_xx: Vec<f64>,
    pub r1: Option<Vec<f64>>,
    pub r2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
struct WavePoint {
    v: f64,
    u1: f64,
    theta: f64,
    theta_hat: f64,
    theta_hat_x: f64,
    theta_hat_xx: f64,
    theta_hat_t: f64,
    a: f64,
    u1_x: f64,
    u1_xx: f64,
    theta_x: f64,
    theta_xx: f64,
    v_xx: f64,
}

fn evaluate(profile: &SelfSimilarProfile, epsilon: f64, t: f64, x: f64) -> WavePoint {
    let s = (epsilon * (1.0 + t)).sqrt();
    let eta = x / s;
    let q = profile.at(eta);
    let p = profile.p_plus;
    let k = 2.0 / (3.0 * p);
    // A = aΘ̂' obeys A' = −ηΘ̂'/2 along the profile, so A'' = −(Θ̂' + ηΘ̂'')/2
    let flux = q.a * q.dtheta;
    let dflux = -0.5 * eta * q.dtheta;
    let d2flux = -0.5 * (q.dtheta + eta * q.d2theta);
    let theta_hat_x = q.dtheta / s;
    let theta_hat_xx = q.d2theta / (s * s);
    let u1 = k * epsilon * flux / s;
    let u1_x = k * epsilon * dflux / (s * s);
    let u1_xx = k * epsilon * d2flux / (s * s * s);
    let theta = q.theta - 0.5 * u1 * u1;
    WavePoint {
        v: k * q.theta,
        u1,
        theta,
        theta_hat: q.theta,
        theta_hat_x,
        theta_hat_xx,
        theta_hat_t: -0.5 * eta * q.dtheta / (1.0 + t),
        a: q.a,
        u1_x,
        u1_xx,
        theta_x: theta_hat_x - u1 * u1_x,
        theta_xx: theta_hat_xx - u1_x * u1_x - u1 * u1_xx,
        v_xx: k * theta_hat_xx,
    }
}

/// Evaluates the contact wave at `η = x/√(ε(1+t))`:
/// `v̄ = 2Θ̂/(3p₊)`, `ū₁ = 2ε a(Θ̂) Θ̂_x/(3p₊)`, `ū₂ = ū₃ = 0`, `θ̄ = Θ̂ − |ū|²/2`.
pub fn build_wave(profile: &SelfSimilarProfile, epsilon: f64, t: f64, x: &[f64]) -> Result<ContactWaveField> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("x", "grid must be strictly increasing"));
    }
    let pts: Vec<WavePoint> = x.par_iter().map(|&xi| evaluate(profile, epsilon, t, xi)).collect();
    let col = |f: fn(&WavePoint) -> f64| pts.iter().map(f).collect::<Vec<f64>>();
    Ok(ContactWaveField {
        frame: Frame::Lagrangian,
        x: x.to_vec(),
        t,
        epsilon,
        p_plus: profile.p_plus,
        delta: profile.delta,
        vbar: col(|p| p.v),
        ubar: pts.iter().map(|p| [p.u1, 0.0, 0.0]).collect(),
        thetabar: col(|p| p.theta),
        theta_hat: col(|p| p.theta_hat),
        theta_hat_x: col(|p| p.theta_hat_x),
        theta_hat_xx: col(|p| p.theta_hat_xx),
        theta_hat_t: col(|p| p.theta_hat_t),
        diffusivity: col(|p| p.a),
        u1_x: col(|p| p.u1_x),
        u1_xx: col(|p| p.u1_xx),
        theta_x: col(|p| p.theta_x),
        theta_xx: col(|p| p.theta_xx),
        v_xx: col(|p| p.v_xx),
        r1: None,
        r2: None,
    })
}

impl ContactWaveField {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn pressure(&self) -> Vec<f64> {
        self.thetabar.iter().zip(&self.vbar).map(|(t, v)| GAS_CONSTANT * t / v).collect()
    }

    /// Evaluates the residuals and stores them on the field.
    pub fn with_residuals(mut self, table: &TransportTable) -> Result<Self> {
        let (r1, r2) = wave_residuals(&self, table)?;
        self.r1 = Some(r1);
        self.r2 = Some(r2);
        Ok(self)
    }
}

/// Residuals of the wave in the Navier–Stokes-type system:
///
/// `R1 = (2ε/(3p₊)) a(Θ̂)Θ̂_t + (p̄ − p₊) − (4εμ(θ̄)/(3v̄)) ū₁ₓ`,
/// `R2 = (ε/v̄)(λ(Θ̂)Θ̂_x − λ(θ̄)θ̄_x) + (p̄ − p₊)ū₁ − (4εμ(θ̄)/(3v̄)) ū₁ū₁ₓ`.
pub fn wave_residuals(wave: &ContactWaveField, table: &TransportTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = wave.len();
    for (name, len) in
        [("theta_hat_t", wave.theta_hat_t.len()), ("u1_x", wave.u1_x.len()), ("theta_x", wave.theta_x.len())]
    {
        if len != n {
            return Err(Error::Precondition(format!("wave field is missing the `{name}` table")));
        }
    }
    let eps = wave.epsilon;
    let p = wave.p_plus;
    let k = 2.0 / (3.0 * p);
    let out: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = wave.vbar[i];
            let th = wave.thetabar[i];
            let u1 = wave.ubar[i][0];
            let dp = GAS_CONSTANT * th / v - p;
            let visc = 4.0 * eps * table.mu(th) / (3.0 * v);
            let r1 = k * eps * wave.diffusivity[i] * wave.theta_hat_t[i] + dp - visc * wave.u1_x[i];
            let r2 = eps / v
                * (table.lambda(wave.theta_hat[i]) * wave.theta_hat_x[i] - table.lambda(th) * wave.theta_x[i])
                + dp * u1
                - visc * u1 * wave.u1_x[i];
            (r1, r2)
        })
        .collect();
    Ok(out.into_iter().unzip())
}

#[cfg(test)]
mod tests {
    use super::super::selfsimilar::{solve_selfsimilar, SelfSimilarOptions};
    use super::*;

    fn profile(theta_plus: f64, table: &TransportTable) -> SelfSimilarProfile {
        let l = |t: f64| table.lambda(t);
        solve_selfsimilar(1.0, theta_plus, 2.0 / 3.0, &l, &SelfSimilarOptions::default()).unwrap()
    }

    fn grid(half: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
    }

    fn bgk_table() -> TransportTable {
        // relaxation model on the isobar p₊ = 2/3: μ = p₊, λ = (5/2)R p₊
        TransportTable::constant(2.0 / 3.0, 2.5 * GAS_CONSTANT * 2.0 / 3.0).unwrap()
    }

    #[test]
    fn flat_profile_gives_constant_wave_and_zero_residuals() {
        let table = bgk_table();
        let w = build_wave(&profile(1.0, &table), 0.01, 1.0, &grid(1.0, 101)).unwrap().with_residuals(&table).unwrap();
        assert!(w.vbar.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(w.ubar.iter().all(|u| *u == [0.0; 3]));
        assert!(w.r1.unwrap().iter().chain(w.r2.as_ref().unwrap()).all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn far_field_and_structure() {
        let table = bgk_table();
        let p = profile(1.2, &table);
        let w = build_wave(&p, 0.01, 0.0, &grid(2.0, 401)).unwrap();
        assert!((w.vbar[0] - 1.0).abs() < 1e-8 && (w.thetabar[0] - 1.0).abs() < 1e-8);
        assert!((w.vbar[400] - 1.2).abs() < 1e-8 && (w.thetabar[400] - 1.2).abs() < 1e-8);
        for i in 0..w.len() {
            assert!((w.vbar[i] - 2.0 * w.theta_hat[i] / (3.0 * w.p_plus)).abs() < 1e-14);
            let u = w.ubar[i];
            assert!((w.thetabar[i] - (w.theta_hat[i] - 0.5 * u[0] * u[0])).abs() < 1e-15);
        }
    }

    #[test]
    fn velocity_scales_with_time_and_epsilon() {
        let table = bgk_table();
        let p = profile(1.2, &table);
        let x = grid(3.0, 1201);
        let umax = |eps: f64, t: f64| {
            let w = build_wave(&p, eps, t, &x).unwrap();
            w.ubar.iter().map(|u| u[0].abs()).fold(0.0, f64::max)
        };
        let r_t = umax(0.01, 3.0) / umax(0.01, 0.0);
        assert!((r_t - 0.5).abs() < 1e-3, "{r_t}");
        let r_e = umax(0.04, 0.0) / umax(0.01, 0.0);
        assert!((r_e - 2.0).abs() < 1e-3, "{r_e}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let table = bgk_table();
        let p = profile(1.2, &table);
        let x = grid(0.5, 2001);
        let dx = x[1] - x[0];
        let w = build_wave(&p, 0.02, 0.5, &x).unwrap();
        let u1: Vec<f64> = w.ubar.iter().map(|u| u[0]).collect();
        let scale_u = w.u1_x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale_t = w.theta_x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 1..x.len() - 1 {
            let du = (u1[i + 1] - u1[i - 1]) / (2.0 * dx);
            let dt = (w.thetabar[i + 1] - w.thetabar[i - 1]) / (2.0 * dx);
            assert!((du - w.u1_x[i]).abs() < 1e-3 * scale_u, "{i}: {du} {}", w.u1_x[i]);
            assert!((dt - w.theta_x[i]).abs() < 1e-3 * scale_t);
        }
    }

    #[test]
    fn residuals_follow_their_scalings() {
        let table = bgk_table();
        let p = profile(1.2, &table);
        let x = grid(4.0, 4001);
        let maxabs = |v: &[f64]| v.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let run = |eps: f64, t: f64| {
            let w = build_wave(&p, eps, t, &x).unwrap();
            let (r1, r2) = wave_residuals(&w, &table).unwrap();
            (maxabs(&r1), maxabs(&r2))
        };
        let (a0, b0) = run(0.01, 0.0);
        let (a3, b3) = run(0.01, 3.0);
        assert!(((a3 / a0) / 0.25 - 1.0).abs() < 0.15);
        assert!(((b3 / b0) / 0.125 - 1.0).abs() < 0.15);
        let (_, b4) = run(0.04, 0.0);
        assert!(((b4 / b0) / 8.0 - 1.0).abs() < 0.15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = profile(1.2, &bgk_table());
        assert!(build_wave(&p, 0.0, 0.0, &[0.0, 1.0]).is_err());
        assert!(build_wave(&p, 0.1, -1.0, &[0.0, 1.0]).is_err());
        assert!(build_wave(&p, 0.1, 0.0, &[1.0, 0.0]).is_err());
    }
}
