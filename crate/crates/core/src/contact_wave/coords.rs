//! Maps between the Lagrangian mass coordinate `x` and the Eulerian position
//! `X`, with `dX = v dx` at fixed time.

use serde::{Deserialize, Serialize};

use super::selfsimilar::SelfSimilarProfile;
use super::wave::{build_wave, ContactWaveField};
use crate::error::{invalid, Error, Result};
use crate::numerics::{cumulative_trapezoid, interp_cubic};
use crate::velocity::Frame;

/// Cumulative integral of `y` over `xs`, shifted to vanish at `x = 0`.
fn integral_from_zero(xs: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if xs.len() < 2 || xs.len() != y.len() {
        return Err(invalid("grid", "need matching arrays with at least two points"));
    }
    if !(xs[0] <= 0.0 && *xs.last().unwrap() >= 0.0) {
        return Err(invalid("grid", format!("[{}, {}] does not contain the origin", xs[0], xs.last().unwrap())));
    }
    let c = cumulative_trapezoid(xs, y);
    let c0 = interp_cubic(xs, &c, 0.0);
    Ok(c.into_iter().map(|v| v - c0).collect())
}

/// `X(x) = origin + ∫₀ˣ v dx'`. Requires `v > 0`.
pub fn eulerian_coordinates(x: &[f64], v: &[f64], origin: f64) -> Result<Vec<f64>> {
    if let Some(bad) = v.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPhysical(format!("specific volume {bad} is not positive")));
    }
    Ok(integral_from_zero(x, v)?.into_iter().map(|m| origin + m).collect())
}

/// `x(X) = ∫₀^X ρ dX' − m₀`, where `m₀` is the mass that has crossed `X = 0`
/// in the positive direction since the labels were fixed.
pub fn lagrangian_coordinates(xe: &[f64], rho: &[f64], mass_through_origin: f64) -> Result<Vec<f64>> {
    if let Some(bad) = rho.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::NonPhysical(format!("density {bad} is not positive")));
    }
    Ok(integral_from_zero(xe, rho)?.into_iter().map(|m| m - mass_through_origin).collect())
}

/// Eulerian position of the particle labelled `x = 0`.
///
/// `ū₁(0, s)` decays like `(1+s)^{-1/2}`, so the path integral has the closed
/// form `2ū₁(0,t)((1+t) − √(1+t))`.
pub fn particle_origin(profile: &SelfSimilarProfile, epsilon: f64, t: f64) -> f64 {
    let s = (epsilon * (1.0 + t)).sqrt();
    let q = profile.at(0.0);
    let u0 = 2.0 * epsilon * q.a * q.dtheta / (3.0 * profile.p_plus * s);
    2.0 * u0 * ((1.0 + t) - (1.0 + t).sqrt())
}

/// Wave state in Eulerian variables `(ρ̄, ū, θ̄)` at positions `X`, together
/// with the Lagrangian label of each position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerianWave {
    pub frame: Frame,
    pub xe: Vec<f64>,
    pub labels: Vec<f64>,
    pub t: f64,
    pub epsilon: f64,
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
    /// Eulerian position of the label `x = 0`.
    pub origin: f64,
}

/// Resamples a Lagrangian wave field on a uniform Eulerian grid with the
/// same number of points spanning the image of the Lagrangian grid.
///
/// The origin drift of the label `x = 0` is not known from the field alone,
/// so the image is anchored at `X(0) = origin`.
pub fn lagrangian_to_eulerian(wave: &ContactWaveField, origin: f64) -> Result<EulerianWave> {
    let xe_of_x = eulerian_coordinates(&wave.x, &wave.vbar, origin)?;
    let n = wave.len();
    let (a, b) = (xe_of_x[0], xe_of_x[n - 1]);
    let xe: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let resample = |y: &[f64]| -> Vec<f64> { xe.iter().map(|&t| interp_cubic(&xe_of_x, y, t)).collect() };
    let rho_lag: Vec<f64> = wave.vbar.iter().map(|v| 1.0 / v).collect();
    let u1: Vec<f64> = wave.ubar.iter().map(|u| u[0]).collect();
    Ok(EulerianWave {
        frame: Frame::Eulerian,
        labels: resample(&wave.x),
        rho: resample(&rho_lag),
        u: resample(&u1).into_iter().map(|v| [v, 0.0, 0.0]).collect(),
        theta: resample(&wave.thetabar),
        xe,
        t: wave.t,
        epsilon: wave.epsilon,
        origin,
    })
}

/// Evaluates the wave exactly at the Eulerian positions `xe` at time `t`,
/// including the drift of the particle labelled `x = 0`.
///
/// Labels are found by inverting `X(x)` on an auxiliary Lagrangian grid four
/// times finer than `xe`; the state is then evaluated at the labels.
pub fn eulerian_wave(profile: &SelfSimilarProfile, epsilon: f64, t: f64, xe: &[f64]) -> Result<EulerianWave> {
    if xe.len() < 2 || xe.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("xe", "Eulerian grid must be strictly increasing with at least two points"));
    }
    let origin = particle_origin(profile, epsilon, t);
    let k = 2.0 / (3.0 * profile.p_plus);
    let v_min = k * profile.theta_minus.min(profile.theta_plus) * 0.999;
    let span = |xv: f64| (xv - origin) / v_min;
    let (lo, hi) = (span(xe[0]).min(-1.0) - 1.0, span(*xe.last().unwrap()).max(1.0) + 1.0);
    let n_aux = 4 * xe.len() + 1;
    let aux: Vec<f64> = (0..n_aux).map(|i| lo + (hi - lo) * i as f64 / (n_aux - 1) as f64).collect();
    let coarse = build_wave(profile, epsilon, t, &aux)?;
    let xe_aux = eulerian_coordinates(&aux, &coarse.vbar, origin)?;
    let labels: Vec<f64> = xe.iter().map(|&p| interp_cubic(&xe_aux, &aux, p)).collect();
    if labels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonPhysical("Eulerian grid does not map to increasing labels".into()));
    }
    let w = build_wave(profile, epsilon, t, &labels)?;
    Ok(EulerianWave {
        frame: Frame::Eulerian,
        xe: xe.to_vec(),
        rho: w.vbar.iter().map(|v| 1.0 / v).collect(),
        u: w.ubar.clone(),
        theta: w.thetabar.clone(),
        labels,
        t,
        epsilon,
        origin,
    })
}
