use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{fit_line, interp_cubic, solve_tridiagonal};

/// Smallest accepted half-width of the `η` domain.
pub const MIN_HALF_WIDTH: f64 = 8.0;

/// Diffusivity of the isobaric temperature equation, `a(θ) = 9 p₊ λ(θ) / (10 θ)`.
#[inline]
pub fn diffusivity(p_plus: f64, lambda: f64, theta: f64) -> f64 {
    0.9 * p_plus * lambda / theta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfSimilarOptions {
    /// Profile computed on `[-half_width, half_width]`.
    pub half_width: f64,
    pub n_eta: usize,
    /// Bound on the max-norm of the discrete ODE residual.
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for SelfSimilarOptions {
    fn default() -> Self {
        Self { half_width: 10.0, n_eta: 2001, tol: 1e-10, max_newton: 60 }
    }
}

impl SelfSimilarOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width >= MIN_HALF_WIDTH) {
            return Err(invalid("half_width", format!("must be at least {MIN_HALF_WIDTH}, got {}", self.half_width)));
        }
        if self.n_eta < 5 {
            return Err(invalid("n_eta", format!("need at least 5 nodes, got {}", self.n_eta)));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        Ok(())
    }
}

/// Gaussian tail constants from `log|Θ̂'| ≈ const − c η²` on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub c_left: f64,
    pub c_right: f64,
    pub r_squared: f64,
}

impl TailFit {
    pub fn c(&self) -> f64 {
        self.c_left.min(self.c_right)
    }
}

/// Self-similar temperature profile `Θ̂(η)`, `η = x/√(ε(1+t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub eta: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub dtheta_hat: Vec<f64>,
    pub d2theta_hat: Vec<f64>,
    /// `a(Θ̂(η))`.
    pub diffusivity: Vec<f64>,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub delta: f64,
    pub p_plus: f64,
    pub residual_norm: f64,
    pub newton_iterations: usize,
    pub tail: Option<TailFit>,
}

/// Profile quantities at one `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub theta: f64,
    pub dtheta: f64,
    pub d2theta: f64,
    pub a: f64,
}

impl SelfSimilarProfile {
    pub fn half_width(&self) -> f64 {
        *self.eta.last().unwrap()
    }

    /// Cubic interpolation of the tables; outside `[-L, L]` the far-field
    /// values are returned.
    pub fn at(&self, eta: f64) -> ProfilePoint {
        let l = self.half_width();
        if eta <= -l || eta >= l {
            let i = if eta <= -l { 0 } else { self.eta.len() - 1 };
            return ProfilePoint { theta: self.theta_hat[i], dtheta: 0.0, d2theta: 0.0, a: self.diffusivity[i] };
        }
        ProfilePoint {
            theta: interp_cubic(&self.eta, &self.theta_hat, eta),
            dtheta: interp_cubic(&self.eta, &self.dtheta_hat, eta),
            d2theta: interp_cubic(&self.eta, &self.d2theta_hat, eta),
            a: interp_cubic(&self.eta, &self.diffusivity, eta),
        }
    }

    pub fn is_monotone(&self) -> bool {
        let s = (self.theta_plus - self.theta_minus).signum();
        self.theta_hat.windows(2).all(|w| s * (w[1] - w[0]) >= -1e-14)
    }
}

struct Discretization<'a> {
    eta: &'a [f64],
    h: f64,
    p_plus: f64,
    lambda: &'a dyn Fn(f64) -> f64,
}

impl Discretization<'_> {
    fn a(&self, theta: f64) -> f64 {
        diffusivity(self.p_plus, (self.lambda)(theta), theta)
    }

    fn da(&self, theta: f64) -> f64 {
        let s = 1e-6 * theta.abs().max(1e-3);
        (self.a(theta + s) - self.a(theta - s)) / (2.0 * s)
    }

    /// Interior residuals `(aΘ')' + (η/2)Θ'` with conservative fluxes.
    fn residual(&self, theta: &[f64], out: &mut [f64]) {
        let n = theta.len();
        let h2 = self.h * self.h;
        let mut flux_left = self.a(0.5 * (theta[0] + theta[1])) * (theta[1] - theta[0]);
        for i in 1..n - 1 {
            let flux_right = self.a(0.5 * (theta[i] + theta[i + 1])) * (theta[i + 1] - theta[i]);
            out[i] = (flux_right - flux_left) / h2 + self.eta[i] * (theta[i + 1] - theta[i - 1]) / (4.0 * self.h);
            flux_left = flux_right;
        }
        out[0] = 0.0;
        out[n - 1] = 0.0;
    }

    /// Tridiagonal Jacobian of the interior residuals.
    fn jacobian(&self, theta: &[f64], lower: &mut [f64], diag: &mut [f64], upper: &mut [f64]) {
        let n = theta.len();
        let h2 = self.h * self.h;
        for i in 1..n - 1 {
            let (ml, mr) = (0.5 * (theta[i - 1] + theta[i]), 0.5 * (theta[i] + theta[i + 1]));
            let (al, ar) = (self.a(ml), self.a(mr));
            let (dal, dar) = (0.5 * self.da(ml), 0.5 * self.da(mr));
            let (gl, gr) = (theta[i] - theta[i - 1], theta[i + 1] - theta[i]);
            let adv = self.eta[i] / (4.0 * self.h);
            upper[i] = (ar + dar * gr) / h2 + adv;
            diag[i] = (-ar + dar * gr - al - dal * gl) / h2;
            lower[i] = (al - dal * gl) / h2 - adv;
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton(disc: &Discretization, theta: &mut [f64], opts: &SelfSimilarOptions) -> Result<(f64, usize)> {
    let n = theta.len();
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let (mut lower, mut diag, mut upper) = (vec![0.0; n - 2], vec![0.0; n - 2], vec![0.0; n - 2]);
    let (mut jl, mut jd, mut ju) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    disc.residual(theta, &mut r);
    let mut norm = max_abs(&r);
    for iter in 0..opts.max_newton {
        if norm <= opts.tol {
            return Ok((norm, iter));
        }
        disc.jacobian(theta, &mut jl, &mut jd, &mut ju);
        lower.copy_from_slice(&jl[1..n - 1]);
        diag.copy_from_slice(&jd[1..n - 1]);
        upper.copy_from_slice(&ju[1..n - 1]);
        let mut step: Vec<f64> = r[1..n - 1].iter().map(|v| -v).collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut step)?;
        let mut damping = 1.0;
        loop {
            trial.copy_from_slice(theta);
            for (t, s) in trial[1..n - 1].iter_mut().zip(&step) {
                *t += damping * s;
            }
            if trial.iter().all(|t| *t > 0.0) {
                disc.residual(&trial, &mut r_trial);
                let nt = max_abs(&r_trial);
                if nt < norm || nt <= opts.tol {
                    theta.copy_from_slice(&trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    norm = nt;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-6 {
                return Err(Error::NoConvergence {
                    solver: "self-similar Newton",
                    detail: format!("line search stalled at residual {norm:.3e}"),
                });
            }
        }
    }
    if norm <= opts.tol {
        Ok((norm, opts.max_newton))
    } else {
        Err(Error::NoConvergence {
            solver: "self-similar Newton",
            detail: format!("residual {norm:.3e} after {} iterations", opts.max_newton),
        })
    }
}

/// Solves `−(η/2)Θ̂' = (a(Θ̂)Θ̂')'` on `[−L, L]` with `Θ̂(∓L) = θ∓` by damped
/// Newton on a conservative central-difference scheme.
///
/// The first attempt starts from the constant-diffusivity (error function)
/// profile; if Newton fails, the jump is ramped up from zero in continuation
/// stages that each start from the previous converged profile.
pub fn solve_selfsimilar(
    theta_minus: f64,
    theta_plus: f64,
    p_plus: f64,
    lambda: &dyn Fn(f64) -> f64,
    opts: &SelfSimilarOptions,
) -> Result<SelfSimilarProfile> {
    opts.validate()?;
    for (name, value) in [("theta_minus", theta_minus), ("theta_plus", theta_plus), ("p_plus", p_plus)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(invalid(name, format!("must be positive, got {value}")));
        }
    }
    let (lo, hi) = (theta_minus.min(theta_plus), theta_minus.max(theta_plus));
    for t in [lo, 0.5 * (lo + hi), hi] {
        let l = lambda(t);
        if !(l > 0.0) || !l.is_finite() {
            return Err(invalid("lambda", format!("must be positive on [{lo}, {hi}], got {l} at {t}")));
        }
    }
    let n = opts.n_eta;
    let l = opts.half_width;
    let h = 2.0 * l / (n - 1) as f64;
    let eta: Vec<f64> = (0..n).map(|i| -l + h * i as f64).collect();
    let disc = Discretization { eta: &eta, h, p_plus, lambda };

    let delta_signed = theta_plus - theta_minus;
    let mut theta = vec![theta_minus; n];
    let mut iterations = 0;
    let mut residual = 0.0;
    if delta_signed != 0.0 {
        let a_mid = disc.a(0.5 * (theta_minus + theta_plus));
        let erf_guess = |s: f64| -> Vec<f64> {
            eta.iter()
                .map(|e| theta_minus + s * delta_signed * 0.5 * (1.0 + erf_approx(e / (2.0 * a_mid.sqrt()))))
                .collect()
        };
        let mut reached = 0.0f64;
        let mut stage = 1.0f64;
        let mut base = vec![theta_minus; n];
        while reached < 1.0 {
            let target = (reached + stage).min(1.0);
            let mut trial = if reached == 0.0 {
                erf_guess(target)
            } else {
                // rescale the previous profile to the new jump
                base.iter().map(|t| theta_minus + (t - theta_minus) * target / reached).collect()
            };
            trial[0] = theta_minus;
            trial[n - 1] = theta_minus + target * delta_signed;
            match newton(&disc, &mut trial, opts) {
                Ok((res, it)) => {
                    iterations += it;
                    residual = res;
                    base = trial;
                    reached = target;
                }
                Err(e) => {
                    stage *= 0.5;
                    if stage < 1.0 / 64.0 {
                        return Err(e);
                    }
                }
            }
        }
        theta = base;
    }

    let mut dtheta = vec![0.0; n];
    let mut d2theta = vec![0.0; n];
    for i in 1..n - 1 {
        dtheta[i] = (theta[i + 1] - theta[i - 1]) / (2.0 * h);
        d2theta[i] = (theta[i + 1] - 2.0 * theta[i] + theta[i - 1]) / (h * h);
    }
    dtheta[0] = (-3.0 * theta[0] + 4.0 * theta[1] - theta[2]) / (2.0 * h);
    dtheta[n - 1] = (3.0 * theta[n - 1] - 4.0 * theta[n - 2] + theta[n - 3]) / (2.0 * h);
    d2theta[0] = d2theta[1];
    d2theta[n - 1] = d2theta[n - 2];
    let diffusivity: Vec<f64> = theta.iter().map(|t| disc.a(*t)).collect();
    let mut profile = SelfSimilarProfile {
        eta,
        theta_hat: theta,
        dtheta_hat: dtheta,
        d2theta_hat: d2theta,
        diffusivity,
        theta_minus,
        theta_plus,
        delta: delta_signed.abs(),
        p_plus,
        residual_norm: residual,
        newton_iterations: iterations,
        tail: None,
    };
    if !profile.is_monotone() {
        return Err(Error::NoConvergence {
            solver: "self-similar Newton",
            detail: "converged to a non-monotone profile".into(),
        });
    }
    if delta_signed != 0.0 {
        profile.tail = fit_tail(&profile, 2.0, 5.0).ok();
    }
    Ok(profile)
}

/// Fits `log|Θ̂'|` against `η²` on `lo ≤ |η| ≤ hi` separately on each side.
pub fn fit_tail(profile: &SelfSimilarProfile, lo: f64, hi: f64) -> Result<TailFit> {
    let side = |sign: f64| -> Result<(f64, f64)> {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (e, d) in profile.eta.iter().zip(&profile.dtheta_hat) {
            let a = e * sign;
            if a >= lo && a <= hi && d.abs() > 0.0 {
                xs.push(e * e);
                ys.push(d.abs().ln());
            }
        }
        let fit = fit_line(&xs, &ys)?;
        Ok((-fit.slope, fit.r_squared))
    };
    let (c_left, r_left) = side(-1.0)?;
    let (c_right, r_right) = side(1.0)?;
    Ok(TailFit { c_left, c_right, r_squared: r_left.min(r_right) })
}

/// Error function, Abramowitz–Stegun 7.1.26 (absolute error below 1.5e-7).
pub(crate) fn erf_approx(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let y = 1.0
        - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t + 0.254_829_592)
            * t
            * (-x * x).exp();
    s * y
}

/// Options for [`relaxation_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Time since the initial step at which the solution is sampled.
    pub time: f64,
    pub dx: f64,
    /// Spatial half-width of the time-stepping domain.
    pub half_width: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { time: 4.0, dx: 0.02, half_width: 30.0 }
    }
}

/// Independent check of the profile: explicit time stepping of
/// `θ_t = (a(θ)θ_x)_x` from step data.
///
/// Step data is invariant under `x → x/√s`, so the solution at time `s` is
/// exactly `Θ̂(x/√s)`. Returns samples `(η, θ)` with `η = x/√s`.
pub fn relaxation_oracle(
    theta_minus: f64,
    theta_plus: f64,
    p_plus: f64,
    lambda: &dyn Fn(f64) -> f64,
    opts: &OracleOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(opts.time > 0.0) || !(opts.dx > 0.0) || !(opts.half_width > 0.0) {
        return Err(invalid("oracle", format!("{opts:?} must be positive")));
    }
    let half = (opts.half_width / opts.dx).round() as usize;
    let n = 2 * half + 1;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 - half as f64) * opts.dx).collect();
    // node at the jump carries the mean so the discrete first moment is exact
    let mut theta: Vec<f64> = (0..n)
        .map(|i| match i.cmp(&half) {
            std::cmp::Ordering::Less => theta_minus,
            std::cmp::Ordering::Equal => 0.5 * (theta_minus + theta_plus),
            std::cmp::Ordering::Greater => theta_plus,
        })
        .collect();
    let a = |t: f64| diffusivity(p_plus, lambda(t), t);
    let a_max = [theta_minus, theta_plus, 0.5 * (theta_minus + theta_plus)].iter().map(|t| a(*t)).fold(0.0, f64::max);
    let dt_max = 0.4 * opts.dx * opts.dx / (1.1 * a_max);
    let steps = (opts.time / dt_max).ceil() as usize;
    let dt = opts.time / steps as f64;
    let r = dt / (opts.dx * opts.dx);
    let mut flux = vec![0.0; n - 1];
    for _ in 0..steps {
        for i in 0..n - 1 {
            flux[i] = a(0.5 * (theta[i] + theta[i + 1])) * (theta[i + 1] - theta[i]);
        }
        for i in 1..n - 1 {
            theta[i] += r * (flux[i] - flux[i - 1]);
        }
    }
    let scale = opts.time.sqrt();
    Ok((x.iter().map(|v| v / scale).collect(), theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_lambda(t: f64) -> f64 {
        t
    }

    #[test]
    fn equal_states_give_constant_profile() {
        let p = solve_selfsimilar(1.0, 1.0, 2.0 / 3.0, &linear_lambda, &SelfSimilarOptions::default()).unwrap();
        assert!(p.theta_hat.iter().all(|t| *t == 1.0));
        assert!(p.dtheta_hat.iter().all(|d| *d == 0.0));
        assert_eq!(p.residual_norm, 0.0);
        assert!(p.tail.is_none());
    }

    #[test]
    fn increasing_profile_with_gaussian_tail() {
        let p = solve_selfsimilar(1.0, 1.2, 2.0 / 3.0, &linear_lambda, &SelfSimilarOptions::default()).unwrap();
        assert!(p.residual_norm <= 1e-10);
        // far-tail increments drop below rounding, so strictness is checked inside |η| ≤ 5
        assert!(p.is_monotone());
        for (w, e) in p.theta_hat.windows(2).zip(&p.eta) {
            if e.abs() <= 5.0 {
                assert!(w[1] > w[0]);
            }
        }
        let mid = p.at(0.0).theta;
        assert!(mid > 1.0 && mid < 1.2);
        let tail = p.tail.unwrap();
        assert!(tail.c() > 0.0, "{tail:?}");
        // constant-diffusivity tails decay like exp(−η²/(4a))
        let a_bar = diffusivity(2.0 / 3.0, 1.1, 1.1);
        assert!((tail.c_left - 0.25 / a_bar).abs() < 0.1 / a_bar);
    }

    #[test]
    fn constant_diffusivity_matches_error_function() {
        // λ(θ) ∝ θ makes a(θ) constant: Θ̂ = θ₋ + δ(1 + erf(η/(2√a)))/2
        let p_plus = 2.0 / 3.0;
        let lam = |t: f64| 0.5 * t;
        let p = solve_selfsimilar(1.0, 1.3, p_plus, &lam, &SelfSimilarOptions::default()).unwrap();
        let a = diffusivity(p_plus, 0.5, 1.0);
        for (e, t) in p.eta.iter().zip(&p.theta_hat).step_by(50) {
            let exact = 1.0 + 0.3 * 0.5 * (1.0 + erf_approx(e / (2.0 * a.sqrt())));
            assert!((t - exact).abs() < 2e-5, "eta {e}: {t} vs {exact}");
        }
    }

    #[test]
    fn decreasing_jump_is_monotone() {
        let p = solve_selfsimilar(1.5, 1.0, 1.0, &|t: f64| t.sqrt(), &SelfSimilarOptions::default()).unwrap();
        assert!(p.is_monotone());
        assert!(p.theta_hat.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn rejects_bad_input() {
        let o = SelfSimilarOptions::default();
        assert!(solve_selfsimilar(-1.0, 1.0, 1.0, &linear_lambda, &o).is_err());
        assert!(solve_selfsimilar(1.0, 1.2, 1.0, &|_| -1.0, &o).is_err());
        let short = SelfSimilarOptions { half_width: 4.0, ..o };
        assert!(solve_selfsimilar(1.0, 1.2, 1.0, &linear_lambda, &short).is_err());
    }

    #[test]
    fn time_stepping_oracle_agrees_with_profile() {
        let p_plus = 2.0 / 3.0;
        let p = solve_selfsimilar(1.0, 1.2, p_plus, &linear_lambda, &SelfSimilarOptions::default()).unwrap();
        let (eta, theta) = relaxation_oracle(1.0, 1.2, p_plus, &linear_lambda, &OracleOptions::default()).unwrap();
        let mut worst = 0.0f64;
        for (e, t) in eta.iter().zip(&theta) {
            if e.abs() <= p.half_width() {
                worst = worst.max((p.at(*e).theta - t).abs());
            }
        }
        assert!(worst < 1e-4, "max deviation {worst:.3e}");
    }
}
