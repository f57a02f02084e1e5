//! Maxwellian-weighted inner products, the macroscopic basis and the
//! projections onto fluid and non-fluid components.
//!
//! Every basis vector is a Maxwellian times a polynomial in ξ, so the basis is
//! stored as polynomial values on the grid. Inner products weighted by the same
//! Maxwellian then reduce to `Σ w M p q` and never divide by a tiny `M`.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::velocity::{
    maxwellian_of, moments_unchecked, primitive_from_conserved, Primitive, VelocityGrid, GAS_CONSTANT,
};

/// Relative moment mismatch tolerated between a slice and the basis used to split it.
pub const STATE_MATCH_TOL: f64 = 1e-6;

/// Orthonormal basis of the five-dimensional span of `{M, ξ_i M, |ξ|² M}`.
#[derive(Debug, Clone)]
pub struct MacroBasis {
    state: Primitive,
    weight: Vec<f64>,
    poly: [Vec<f64>; 5],
    analytic_gram: [[f64; 5]; 5],
}

impl MacroBasis {
    /// The weight is the moment-exact discrete Maxwellian of `state`, so the
    /// macroscopic part of any slice with these moments is exactly that weight.
    pub fn new(state: Primitive, grid: &VelocityGrid) -> Result<Self> {
        let weight = discrete_maxwellian(&state, grid)?;
        Self::with_weight(state, weight, grid)
    }

    /// Builds the basis around an explicit weight slice, which must be a
    /// Maxwellian of `state`, sampled or moment-corrected.
    pub(crate) fn with_weight(state: Primitive, weight: Vec<f64>, grid: &VelocityGrid) -> Result<Self> {
        check_len(grid.len(), weight.len())?;
        let rt = GAS_CONSTANT * state.theta;
        let srt = rt.sqrt();
        let n = grid.len();
        let mut poly: [Vec<f64>; 5] = Default::default();
        for p in poly.iter_mut() {
            *p = Vec::with_capacity(n);
        }
        let inv_sqrt_rho = 1.0 / state.rho.sqrt();
        let inv_sqrt_6rho = 1.0 / (6.0 * state.rho).sqrt();
        for xi in grid.nodes() {
            let c = [xi[0] - state.u[0], xi[1] - state.u[1], xi[2] - state.u[2]];
            let q = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) / rt;
            poly[0].push(inv_sqrt_rho);
            for a in 0..3 {
                poly[a + 1].push(c[a] / srt * inv_sqrt_rho);
            }
            poly[4].push((q - 3.0) * inv_sqrt_6rho);
        }
        let mw: Vec<f64> = grid.weights().iter().zip(&weight).map(|(w, m)| w * m).collect();
        let dot = |a: &[f64], b: &[f64]| -> f64 { mw.iter().zip(a).zip(b).map(|((m, x), y)| m * x * y).sum() };
        let mut analytic_gram = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                analytic_gram[i][j] = dot(&poly[i], &poly[j]);
            }
        }
        // modified Gram-Schmidt, applied twice so the discrete Gram matrix is
        // the identity to rounding
        for _ in 0..2 {
            for j in 0..5 {
                for i in 0..j {
                    let r = dot(&poly[i], &poly[j]);
                    let (head, tail) = poly.split_at_mut(j);
                    for (pj, pi) in tail[0].iter_mut().zip(&head[i]) {
                        *pj -= r * pi;
                    }
                }
                let norm = dot(&poly[j], &poly[j]).sqrt();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::NonPhysical(format!("macroscopic basis degenerate at direction {j}")));
                }
                for v in poly[j].iter_mut() {
                    *v /= norm;
                }
            }
        }
        Ok(Self { state, weight, poly, analytic_gram })
    }

    pub fn state(&self) -> &Primitive {
        &self.state
    }

    /// The Maxwellian `M` defining the inner product.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// `χ_j / M` on the grid.
    pub fn polynomial(&self, j: usize) -> &[f64] {
        &self.poly[j]
    }

    /// `χ_j` on the grid.
    pub fn chi(&self, j: usize) -> Vec<f64> {
        self.poly[j].iter().zip(&self.weight).map(|(p, m)| p * m).collect()
    }

    /// Gram matrix of the closed-form basis before re-orthonormalization.
    pub fn analytic_gram(&self) -> [[f64; 5]; 5] {
        self.analytic_gram
    }

    /// `⟨f, χ_j⟩_M` for all five directions.
    pub fn coefficients(&self, f: &[f64], grid: &VelocityGrid) -> [f64; 5] {
        let mut c = [0.0; 5];
        for (k, (w, v)) in grid.weights().iter().zip(f).enumerate() {
            let wv = w * v;
            for j in 0..5 {
                c[j] += wv * self.poly[j][k];
            }
        }
        c
    }

    /// Writes `Σ c_j χ_j` into `out`.
    pub fn synthesize_into(&self, c: &[f64; 5], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..5 {
                s += c[j] * self.poly[j][k];
            }
            *o = s * self.weight[k];
        }
    }

    pub fn p0(&self, f: &[f64], grid: &VelocityGrid) -> Vec<f64> {
        let c = self.coefficients(f, grid);
        let mut out = vec![0.0; f.len()];
        self.synthesize_into(&c, &mut out);
        out
    }

    pub fn p1(&self, f: &[f64], grid: &VelocityGrid) -> Vec<f64> {
        let mut out = f.to_vec();
        self.p1_in_place(&mut out, grid);
        out
    }

    pub fn p1_in_place(&self, f: &mut [f64], grid: &VelocityGrid) {
        let c = self.coefficients(f, grid);
        for (k, v) in f.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..5 {
                s += c[j] * self.poly[j][k];
            }
            *v -= s * self.weight[k];
        }
    }

    /// `⟨h, g⟩_M`.
    pub fn inner(&self, h: &[f64], g: &[f64], grid: &VelocityGrid) -> f64 {
        grid.weights().iter().zip(h).zip(g).zip(&self.weight).map(|(((w, a), b), m)| w * a * b / m).sum()
    }
}

/// Builds the re-orthonormalized basis at the given state.
pub fn build_basis(rho: f64, u: [f64; 3], theta: f64, grid: &VelocityGrid) -> Result<MacroBasis> {
    MacroBasis::new(Primitive::new(rho, u, theta)?, grid)
}

/// Basis built from the slice's own moments.
pub fn local_basis(f: &[f64], grid: &VelocityGrid) -> Result<MacroBasis> {
    check_len(grid.len(), f.len())?;
    let state = primitive_from_conserved(&moments_unchecked(f, grid))?;
    MacroBasis::new(state, grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroMacroSplit {
    pub macro_part: Vec<f64>,
    pub micro: Vec<f64>,
}

/// Splits `f = P0 f + P1 f` using a basis built at the slice's own state.
pub fn project(f: &[f64], basis: &MacroBasis, grid: &VelocityGrid) -> Result<MicroMacroSplit> {
    check_len(grid.len(), f.len())?;
    check_len(basis.len(), f.len())?;
    let slice_state = primitive_from_conserved(&moments_unchecked(f, grid))?;
    let b = basis.state();
    let scale_u = b.theta.sqrt();
    let mismatch = [
        (slice_state.rho - b.rho).abs() / b.rho,
        (slice_state.u[0] - b.u[0]).abs() / scale_u,
        (slice_state.u[1] - b.u[1]).abs() / scale_u,
        (slice_state.u[2] - b.u[2]).abs() / scale_u,
        (slice_state.theta - b.theta).abs() / b.theta,
    ];
    let worst = mismatch.iter().cloned().fold(0.0, f64::max);
    if worst > STATE_MATCH_TOL {
        return Err(Error::Precondition(format!(
            "basis state differs from the slice moments by {worst:.3e} (relative), limit {STATE_MATCH_TOL:e}"
        )));
    }
    let macro_part = basis.p0(f, grid);
    let micro = f.iter().zip(&macro_part).map(|(a, b)| a - b).collect();
    Ok(MicroMacroSplit { macro_part, micro })
}

/// `Σ_k w_k h_k g_k / weight_k`.
pub fn weighted_inner(h: &[f64], g: &[f64], weight: &[f64], grid: &VelocityGrid) -> Result<f64> {
    check_len(grid.len(), h.len())?;
    check_len(grid.len(), g.len())?;
    check_len(grid.len(), weight.len())?;
    check_positive_weight(weight)?;
    Ok(grid.weights().iter().zip(h).zip(g).zip(weight).map(|(((w, a), b), m)| w * a * b / m).sum())
}

/// Discrete `∫ |f − M_ref|² / M* dξ`.
pub fn weighted_l2_error(f: &[f64], reference: &[f64], mstar: &[f64], grid: &VelocityGrid) -> Result<f64> {
    check_len(grid.len(), f.len())?;
    check_len(grid.len(), reference.len())?;
    check_len(grid.len(), mstar.len())?;
    check_positive_weight(mstar)?;
    Ok(weighted_l2_error_unchecked(f, reference, mstar, grid))
}

pub(crate) fn weighted_l2_error_unchecked(f: &[f64], reference: &[f64], mstar: &[f64], grid: &VelocityGrid) -> f64 {
    let mut acc = 0.0;
    for (((w, a), b), m) in grid.weights().iter().zip(f).zip(reference).zip(mstar) {
        let d = a - b;
        acc += w * d * d / m;
    }
    acc
}

fn check_positive_weight(weight: &[f64]) -> Result<()> {
    if let Some(k) = weight.iter().position(|&m| !(m > 0.0)) {
        return Err(invalid("weight", format!("entry {k} is {} (must be strictly positive)", weight[k])));
    }
    Ok(())
}

/// Maxwellian sampled on the grid and corrected within the macroscopic span
/// so that its discrete moments equal those of `state` to rounding.
pub fn discrete_maxwellian(state: &Primitive, grid: &VelocityGrid) -> Result<Vec<f64>> {
    state.validate()?;
    let m = maxwellian_of(state, grid);
    let basis = MacroBasis::with_weight(*state, m, grid)?;
    let target = state.conserved().as_array();
    let mut f = basis.weight().to_vec();
    // two passes: the second removes the rounding left by the first
    for _ in 0..2 {
        let have = moments_unchecked(&f, grid).as_array();
        let mut t = Matrix5::zeros();
        for j in 0..5 {
            let chi = basis.chi(j);
            let mj = moments_unchecked(&chi, grid).as_array();
            for i in 0..5 {
                t[(i, j)] = mj[i];
            }
        }
        let rhs = Vector5::from_fn(|i, _| target[i] - have[i]);
        let c = t.lu().solve(&rhs).ok_or_else(|| Error::Singular("moment correction matrix is singular".into()))?;
        let mut corr = vec![0.0; f.len()];
        basis.synthesize_into(&[c[0], c[1], c[2], c[3], c[4]], &mut corr);
        for (a, b) in f.iter_mut().zip(&corr) {
            *a += b;
        }
    }
    Ok(f)
}

/// Parameters of the reference Maxwellian `M*` used by the weighted norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMaxwellian {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

impl GlobalMaxwellian {
    /// `u* = 0`, `ρ* = (ρ− + ρ+)/2`, `θ* = 0.9 min(θ−, θ+)`.
    pub fn default_for(rho_minus: f64, rho_plus: f64, theta_minus: f64, theta_plus: f64) -> Self {
        Self { rho: 0.5 * (rho_minus + rho_plus), u: [0.0; 3], theta: 0.9 * theta_minus.min(theta_plus) }
    }

    pub fn state(&self) -> Primitive {
        Primitive { rho: self.rho, u: self.u, theta: self.theta }
    }

    /// Checks `θ/2 < θ* < θ` for one temperature.
    pub fn check_window(&self, theta: f64) -> Result<()> {
        if 0.5 * theta < self.theta && self.theta < theta {
            Ok(())
        } else {
            Err(Error::WindowViolation(format!(
                "theta* = {} must lie strictly between theta/2 = {} and theta = {}",
                self.theta,
                0.5 * theta,
                theta
            )))
        }
    }

    /// Checks the window for every temperature in `[lo, hi]`.
    pub fn check_window_range(&self, lo: f64, hi: f64) -> Result<()> {
        self.check_window(lo)?;
        self.check_window(hi)
    }

    pub fn slice(&self, grid: &VelocityGrid) -> Result<Vec<f64>> {
        let s = self.state();
        s.validate()?;
        Ok(maxwellian_of(&s, grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::maxwellian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> VelocityGrid {
        VelocityGrid::new([16, 12, 12], 6.0, 1.2).unwrap()
    }

    fn fine_grid() -> VelocityGrid {
        VelocityGrid::new([32, 24, 24], 6.0, 1.8).unwrap()
    }

    fn norm(f: &[f64], g: &VelocityGrid) -> f64 {
        g.weights().iter().zip(f).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn discrete_gram_is_identity() {
        let g = grid();
        let b = build_basis(1.0, [0.0; 3], 1.0, &g).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let ip = b.inner(&b.chi(i), &b.chi(j), &g);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ip - e).abs() < 1e-13, "({i},{j}) = {ip}");
            }
        }
    }

    #[test]
    fn closed_form_basis_is_orthonormal_by_quadrature() {
        let g = fine_grid();
        let b = build_basis(1.0, [0.0; 3], 1.0, &g).unwrap();
        let gram = b.analytic_gram();
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - e).abs() < 1e-8, "({i},{j}) = {}", gram[i][j]);
            }
        }
    }

    #[test]
    fn energy_direction_keeps_its_sign() {
        let g = grid();
        for &(rho, u, th) in &[(1.0, 0.0, 1.0), (1.7, 0.2, 0.8), (0.6, -0.1, 1.2)] {
            let b = build_basis(rho, [u, 0.0, 0.0], th, &g).unwrap();
            let m = b.weight();
            let rt = GAS_CONSTANT * th;
            let probe: Vec<f64> = g
                .nodes()
                .iter()
                .zip(m)
                .map(|(xi, mk)| {
                    let q = ((xi[0] - u).powi(2) + xi[1] * xi[1] + xi[2] * xi[2]) / rt;
                    (q - 3.0) * mk
                })
                .collect();
            assert!(b.inner(&b.chi(4), &probe, &g) > 0.0);
        }
    }

    #[test]
    fn maxwellian_has_no_micro_part() {
        let g = grid();
        let m = discrete_maxwellian(&Primitive::at_rest(1.0, 1.0), &g).unwrap();
        let b = local_basis(&m, &g).unwrap();
        let s = project(&m, &b, &g).unwrap();
        assert!(norm(&s.micro, &g) < 1e-12 * norm(&m, &g));
    }

    #[test]
    fn orthogonal_bump_is_purely_micro() {
        let g = grid();
        let b = build_basis(1.0, [0.0; 3], 1.0, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = b.weight().iter().map(|m| 0.05 * m * rng.random_range(-1.0..1.0)).collect();
        let bump = b.p1(&raw, &g);
        let f: Vec<f64> = b.weight().iter().zip(&bump).map(|(m, p)| m + p).collect();
        let s = project(&f, &b, &g).unwrap();
        for k in 0..g.len() {
            assert!((s.macro_part[k] - b.weight()[k]).abs() < 1e-13);
            assert!((s.micro[k] - bump[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn mismatched_basis_is_rejected() {
        let g = grid();
        let m = maxwellian(1.0, [0.0; 3], 1.0, &g).unwrap();
        let b = build_basis(1.0, [0.0; 3], 1.1, &g).unwrap();
        assert!(matches!(project(&m, &b, &g), Err(Error::Precondition(_))));
    }

    #[test]
    fn micro_part_has_no_conserved_moments() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = build_basis(1.0, [0.1, 0.0, 0.0], 1.1, &g).unwrap();
        let h: Vec<f64> = b.weight().iter().map(|m| m * rng.random_range(-1.0..1.0)).collect();
        let p1 = b.p1(&h, &g);
        let mom = moments_unchecked(&p1, &g).as_array();
        let scale = norm(&h, &g);
        for v in mom {
            assert!(v.abs() < 1e-10 * scale, "{v}");
        }
    }

    #[test]
    fn weighted_inner_examples() {
        let g = fine_grid();
        let b = build_basis(1.0, [0.0; 3], 1.0, &g).unwrap();
        let m = b.weight();
        assert!((weighted_inner(&b.chi(0), &b.chi(0), m, &g).unwrap() - 1.0).abs() < 1e-13);
        assert!(weighted_inner(&b.chi(0), &b.chi(1), m, &g).unwrap().abs() < 1e-13);

        // ∫ M_{1.1}² / M_1 for unit densities at rest: with a = 1/(R·1.1), b = 1/R,
        // the integrand is a Gaussian of precision 2a − b
        let m2 = maxwellian(1.0, [0.0; 3], 1.1, &g).unwrap();
        let v = weighted_inner(&m2, &m2, m, &g).unwrap();
        let r = GAS_CONSTANT;
        let (a, bb) = (1.0 / (r * 1.1), 1.0 / r);
        let n1 = (2.0 * std::f64::consts::PI * r * 1.1).powf(-1.5);
        let n0 = (2.0 * std::f64::consts::PI * r).powf(-1.5);
        let exact = n1 * n1 / n0 * (2.0 * std::f64::consts::PI / (2.0 * a - bb)).powf(1.5);
        assert!((v - exact).abs() < 1e-7 * exact, "{v} vs {exact}");

        let mut bad = m.to_vec();
        bad[3] = 0.0;
        assert!(weighted_inner(&m2, &m2, &bad, &g).is_err());
    }

    #[test]
    fn weighted_error_examples() {
        let g = fine_grid();
        let mref = maxwellian(1.0, [0.0; 3], 1.0, &g).unwrap();
        let mstar = maxwellian(1.0, [0.0; 3], 0.85, &g).unwrap();
        assert_eq!(weighted_l2_error(&mref, &mref, &mstar, &g).unwrap(), 0.0);

        let c = 0.3;
        let shifted: Vec<f64> = mref.iter().zip(&mstar).map(|(a, s)| a + c * s).collect();
        let e = weighted_l2_error(&shifted, &mref, &mstar, &g).unwrap();
        assert!((e - c * c * g.integrate(&mstar)).abs() < 1e-13);

        // three-Gaussian closed form for ∫ (M_{1.05} − M_1)² / M_{0.85}
        let f = maxwellian(1.0, [0.0; 3], 1.05, &g).unwrap();
        let e = weighted_l2_error(&f, &mref, &mstar, &g).unwrap();
        let r = GAS_CONSTANT;
        let pi2 = 2.0 * std::f64::consts::PI;
        let norm = |t: f64| (pi2 * r * t).powf(-1.5);
        let gauss = |ta: f64, tb: f64| {
            let prec = 1.0 / (r * ta) + 1.0 / (r * tb) - 1.0 / (r * 0.85);
            norm(ta) * norm(tb) / norm(0.85) * (pi2 / prec).powf(1.5)
        };
        let exact = gauss(1.05, 1.05) - 2.0 * gauss(1.05, 1.0) + gauss(1.0, 1.0);
        assert!((e - exact).abs() < 1e-6 * exact, "{e} vs {exact}");
    }

    #[test]
    fn discrete_maxwellian_moments_are_exact() {
        let g = grid();
        let s = Primitive::new(1.3, [0.2, 0.0, 0.0], 0.9).unwrap();
        let f = discrete_maxwellian(&s, &g).unwrap();
        let have = moments_unchecked(&f, &g).as_array();
        let want = s.conserved().as_array();
        for i in 0..5 {
            assert!((have[i] - want[i]).abs() < 1e-14, "{i}: {} vs {}", have[i], want[i]);
        }
        assert!(f.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn window_check() {
        let m = GlobalMaxwellian::default_for(1.0, 1.0 / 1.2, 1.0, 1.2);
        assert!((m.theta - 0.9).abs() < 1e-15);
        assert!(m.check_window_range(1.0, 1.2).is_ok());
        let hot = GlobalMaxwellian { theta: 1.3, ..m };
        assert!(matches!(hot.check_window_range(1.0, 1.2), Err(Error::WindowViolation(_))));
        let cold = GlobalMaxwellian { theta: 0.55, ..m };
        assert!(cold.check_window_range(1.0, 1.2).is_err());
    }
}
