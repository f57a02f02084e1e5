//! The linearized collision operator `L_M h = 2Q(M, h)` and its inverse on the
//! microscopic subspace.
//!
//! The hard-sphere matrix is assembled directly from the collision events in
//! the scaled variable `y = √(w/M) h`, where the `M`-weighted inner product
//! becomes the Euclidean one. The macroscopic directions are then projected out
//! on both sides so that the null space is exactly the five-dimensional span.

use nalgebra::{DMatrix, DVector, LU};

use super::hard_sphere::HardSphereKernel;
use super::{collision_frequency, CollisionKind, CollisionModel};
use crate::error::{check_len, Error, Result};
use crate::micromacro::MacroBasis;
use crate::velocity::{maxwellian_of, Primitive, VelocityGrid};

/// Relative residual required from every inverse solve.
pub const INVERSE_RESIDUAL_TOL: f64 = 1e-10;
/// Largest macroscopic fraction accepted in a right-hand side.
pub const MICRO_RHS_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    state: Primitive,
    kind: CollisionKind,
    nu0: f64,
    basis: MacroBasis,
    nu: Vec<f64>,
    /// `√(w/M)` per node.
    scale: Vec<f64>,
    /// Scaled, projected hard-sphere matrix.
    matrix: Option<DMatrix<f64>>,
    lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    weights: Vec<f64>,
}

impl LinearizedOperator {
    pub fn state(&self) -> &Primitive {
        &self.state
    }

    pub fn kind(&self) -> CollisionKind {
        self.kind
    }

    /// Basis whose weight defines the inner product the operator is symmetric in.
    pub fn basis(&self) -> &MacroBasis {
        &self.basis
    }

    /// Collision frequency `ν(ξ)` at the linearization state.
    pub fn frequency(&self) -> &[f64] {
        &self.nu
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Scaled matrix `√(w/M) L √(M/w)`; `None` for BGK.
    pub fn scaled_matrix(&self) -> Option<&DMatrix<f64>> {
        self.matrix.as_ref()
    }

    /// `√(w/M)` per node.
    pub fn scaling(&self) -> &[f64] {
        &self.scale
    }

    fn grid_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `L_M h`.
    pub fn apply(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), h.len())?;
        match self.kind {
            CollisionKind::Bgk => {
                let mut out = self.p1(h);
                for v in out.iter_mut() {
                    *v *= -self.nu0;
                }
                Ok(out)
            }
            CollisionKind::HardSphere => {
                let m = self.matrix.as_ref().expect("hard-sphere operator carries its matrix");
                let y = DVector::from_iterator(h.len(), h.iter().zip(&self.scale).map(|(a, s)| a * s));
                let z = m * y;
                Ok(z.iter().zip(&self.scale).map(|(a, s)| a / s).collect())
            }
        }
    }

    /// `P1 h` in this operator's inner product.
    pub fn p1(&self, h: &[f64]) -> Vec<f64> {
        let c = self.coefficients(h);
        let mut out = h.to_vec();
        let mut macro_part = vec![0.0; h.len()];
        self.basis.synthesize_into(&c, &mut macro_part);
        for (o, m) in out.iter_mut().zip(&macro_part) {
            *o -= m;
        }
        out
    }

    fn coefficients(&self, h: &[f64]) -> [f64; 5] {
        let mut c = [0.0; 5];
        for (k, (w, v)) in self.grid_weights().iter().zip(h).enumerate() {
            for (j, cj) in c.iter_mut().enumerate() {
                *cj += w * v * self.basis.polynomial(j)[k];
            }
        }
        c
    }

    /// `⟨h, g⟩_M` with this operator's weight.
    pub fn inner(&self, h: &[f64], g: &[f64]) -> f64 {
        self.grid_weights().iter().zip(h).zip(g).zip(self.basis.weight()).map(|(((w, a), b), m)| w * a * b / m).sum()
    }

    /// Dense matrix of the action in the unscaled variable (row-major order of `k`).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.apply(&e).expect("length matches");
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// Solves `L_M h = rhs` for microscopic `rhs`, returning microscopic `h`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), rhs.len())?;
        let c = self.coefficients(rhs);
        let macro_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = self.inner(rhs, rhs).sqrt();
        if macro_norm > MICRO_RHS_TOL * norm {
            return Err(Error::Precondition(format!(
                "right-hand side is not microscopic: macroscopic fraction {:.3e}",
                macro_norm / norm
            )));
        }
        if norm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        match self.kind {
            CollisionKind::Bgk => {
                let mut out = self.p1(rhs);
                for v in out.iter_mut() {
                    *v /= -self.nu0;
                }
                Ok(out)
            }
            CollisionKind::HardSphere => self.solve_dense(rhs, norm),
        }
    }

    fn solve_dense(&self, rhs: &[f64], norm: f64) -> Result<Vec<f64>> {
        let m = self.matrix.as_ref().expect("hard-sphere operator carries its matrix");
        let lu = self.lu.as_ref().expect("hard-sphere operator carries its factorization");
        let n = rhs.len();
        // remove the rounding-level macroscopic part before solving
        let clean = self.p1(rhs);
        let b = DVector::from_iterator(n, clean.iter().zip(&self.scale).map(|(a, s)| a * s));
        let bnorm = b.norm();
        let mut y = lu.solve(&b).ok_or_else(|| Error::Singular("restricted linearized operator is singular".into()))?;
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let r = &b - m * &y;
            rel = r.norm() / bnorm;
            if rel <= INVERSE_RESIDUAL_TOL {
                break;
            }
            let dy =
                lu.solve(&r).ok_or_else(|| Error::Singular("restricted linearized operator is singular".into()))?;
            y += dy;
        }
        if !(rel <= INVERSE_RESIDUAL_TOL) {
            return Err(Error::NoConvergence {
                solver: "linearized inverse",
                detail: format!("relative residual {rel:.3e} after refinement (rhs norm {norm:.3e})"),
            });
        }
        let h: Vec<f64> = y.iter().zip(&self.scale).map(|(a, s)| a / s).collect();
        Ok(self.p1(&h))
    }
}

/// Builds `L_M` at the given state.
pub fn build_linearized(state: &Primitive, grid: &VelocityGrid, model: &CollisionModel) -> Result<LinearizedOperator> {
    state.validate()?;
    model.validate()?;
    match model.kind {
        CollisionKind::Bgk => {
            let basis = MacroBasis::new(*state, grid)?;
            let scale = grid.weights().iter().zip(basis.weight()).map(|(w, m)| (w / m).sqrt()).collect();
            Ok(LinearizedOperator {
                state: *state,
                kind: CollisionKind::Bgk,
                nu0: model.nu0,
                basis,
                nu: vec![model.nu0; grid.len()],
                scale,
                matrix: None,
                lu: None,
                weights: grid.weights().to_vec(),
            })
        }
        CollisionKind::HardSphere => build_hard_sphere(state, grid, model),
    }
}

fn build_hard_sphere(state: &Primitive, grid: &VelocityGrid, model: &CollisionModel) -> Result<LinearizedOperator> {
    let kernel = HardSphereKernel::new(grid, &model.angular)?;
    let m = maxwellian_of(state, grid);
    if m.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NonPhysical("Maxwellian underflows on the velocity grid".into()));
    }
    let n = grid.len();
    let wm: Vec<f64> = grid.weights().iter().zip(&m).map(|(w, v)| w * v).collect();
    let r: Vec<f64> = wm.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut a = DMatrix::from_row_slice(n, n, &assemble_weak_form(&kernel, &wm, &r));

    let basis = MacroBasis::with_weight(*state, m.clone(), grid)?;
    // scaled basis vectors √(wM) p_j are Euclidean-orthonormal
    let v = DMatrix::from_fn(n, 5, |k, j| wm[k].sqrt() * basis.polynomial(j)[k]);
    let av = &a * &v;
    let vta = v.transpose() * &a;
    let vtav = v.transpose() * &av;
    a -= &v * &vta;
    a -= &av * v.transpose();
    a += &v * (vtav * v.transpose());

    let nu = collision_frequency(grid, &m, &model.angular)?;
    let shift = nu.iter().sum::<f64>() / n as f64;
    let shifted = &a - (&v * v.transpose()) * shift;
    let lu = shifted.lu();
    if lu.determinant() == 0.0 {
        return Err(Error::Singular("restricted linearized operator is singular".into()));
    }
    let scale = grid.weights().iter().zip(&m).map(|(w, mv)| (w / mv).sqrt()).collect();
    Ok(LinearizedOperator {
        state: *state,
        kind: CollisionKind::HardSphere,
        nu0: model.nu0,
        basis,
        nu,
        scale,
        matrix: Some(a),
        lu: Some(lu),
        weights: grid.weights().to_vec(),
    })
}

/// Weak form `⟨g, L h⟩_M = −¼ Σ_events c W (ΔG)(ΔH)` with
/// `ΔH = H(ξ') + H(ξ*') − H(ξ) − H(ξ*)`, `H = h/M`, `W = w_k M_k w_l M_l`,
/// returned in the scaled variable as a row-major matrix.
///
/// The quadratic form is a negative sum of squares, so the discrete operator is
/// symmetric and dissipative whatever the interpolation error. Collision
/// invariants that trilinear interpolation reproduces exactly (1 and ξ) lie in
/// its null space without any correction.
fn assemble_weak_form(kernel: &HardSphereKernel, wm: &[f64], r: &[f64]) -> Vec<f64> {
    let counts = kernel.counts();
    let n = wm.len();
    let mut out = vec![0.0; n * n];
    let mut fams = Vec::new();
    let mut idx = [0usize; 18];
    let mut val = [0.0f64; 18];
    // sequential on purpose: stencil rows of different events overlap, and a
    // fixed accumulation order keeps the matrix reproducible
    for d0 in kernel.difference_planes() {
        for d in kernel.differences_in_plane(d0) {
            kernel.families(d, &mut fams);
            for fam in &fams {
                let mut o1 = [0isize; 8];
                let mut o2 = [0isize; 8];
                for c in 0..8 {
                    let bits = [((c >> 2) & 1) as isize, ((c >> 1) & 1) as isize, (c & 1) as isize];
                    o1[c] = ((fam.off1[0] + bits[0]) * counts[1] as isize + fam.off1[1] + bits[1]) * counts[2] as isize
                        + fam.off1[2]
                        + bits[2];
                    o2[c] = ((fam.off2[0] + bits[0]) * counts[1] as isize + fam.off2[1] + bits[1]) * counts[2] as isize
                        + fam.off2[2]
                        + bits[2];
                }
                let dflat = (d[0] * counts[1] as isize + d[1]) * counts[2] as isize + d[2];
                for k0 in fam.lo[0]..=fam.hi[0] {
                    for k1 in fam.lo[1]..=fam.hi[1] {
                        for k2 in fam.lo[2]..=fam.hi[2] {
                            let k = (k0 * counts[1] + k1) * counts[2] + k2;
                            let l = (k as isize - dflat) as usize;
                            let scale = -0.25 * fam.coef * wm[k] * wm[l];
                            let mut len = 0;
                            for c in 0..8 {
                                if fam.w1[c] != 0.0 {
                                    let j = (k as isize + o1[c]) as usize;
                                    idx[len] = j;
                                    val[len] = fam.w1[c] * r[j];
                                    len += 1;
                                }
                                if fam.w2[c] != 0.0 {
                                    let j = (k as isize + o2[c]) as usize;
                                    idx[len] = j;
                                    val[len] = fam.w2[c] * r[j];
                                    len += 1;
                                }
                            }
                            idx[len] = k;
                            val[len] = -r[k];
                            idx[len + 1] = l;
                            val[len + 1] = -r[l];
                            len += 2;
                            for p in 0..len {
                                let row = &mut out[idx[p] * n..(idx[p] + 1) * n];
                                let sp = scale * val[p];
                                for q in 0..len {
                                    row[idx[q]] += sp * val[q];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `L_M^{-1} rhs` on the microscopic subspace.
pub fn solve_lm_inverse(op: &LinearizedOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    op.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::super::{hard_sphere::HardSphereKernel, AngularQuadrature};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_micro(op: &LinearizedOperator, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = op.basis().weight().iter().map(|m| m * rng.random_range(-1.0..1.0)).collect();
        op.p1(&raw)
    }

    #[test]
    fn bgk_null_space_and_dissipation() {
        let g = VelocityGrid::new([12, 10, 10], 6.0, 1.2).unwrap();
        let op = build_linearized(&Primitive::at_rest(1.0, 1.0), &g, &CollisionModel::bgk(1.5).unwrap()).unwrap();
        for j in 0..5 {
            let l = op.apply(&op.basis().chi(j)).unwrap();
            assert!(l.iter().all(|v| v.abs() < 1e-14));
        }
        let h = random_micro(&op, 4);
        let lh = op.apply(&h).unwrap();
        let lhs = op.inner(&h, &lh);
        let rhs = -1.5 * op.inner(&h, &h);
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs());
        let back = op.solve(&lh).unwrap();
        for (a, b) in back.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bgk_dense_matches_action() {
        let g = VelocityGrid::new([8, 8, 8], 5.0, 1.0).unwrap();
        let op = build_linearized(&Primitive::at_rest(1.0, 1.0), &g, &CollisionModel::bgk(2.0).unwrap()).unwrap();
        let d = op.to_dense();
        let h = random_micro(&op, 8);
        let via = &d * DVector::from_vec(h.clone());
        let direct = op.apply(&h).unwrap();
        for (a, b) in via.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_macroscopic_rhs() {
        let g = VelocityGrid::new([8, 8, 8], 5.0, 1.0).unwrap();
        let op = build_linearized(&Primitive::at_rest(1.0, 1.0), &g, &CollisionModel::bgk(1.0).unwrap()).unwrap();
        assert!(matches!(op.solve(&op.basis().chi(0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn hard_sphere_matrix_symmetric_dissipative_and_consistent() {
        let g = VelocityGrid::new([8, 8, 8], 5.0, 1.0).unwrap();
        let model = CollisionModel::hard_sphere(AngularQuadrature::new(8, 8).unwrap()).unwrap();
        let state = Primitive::at_rest(1.0, 1.0);
        let op = build_linearized(&state, &g, &model).unwrap();
        let a = op.scaled_matrix().unwrap();
        assert!((a - a.transpose()).norm() < 1e-12 * a.norm());
        for seed in 0..4 {
            let h = random_micro(&op, seed);
            assert!(op.inner(&h, &op.apply(&h).unwrap()) < 0.0);
        }
        // the shear mode sees the same dissipation as the strong form 2Q(M, h)
        let m = op.basis().weight().to_vec();
        let src: Vec<f64> = g.nodes().iter().zip(&m).map(|(x, mv)| x[0] * x[0] * mv).collect();
        let h = op.p1(&src);
        let kernel = HardSphereKernel::new(&g, &model.angular).unwrap();
        let q = kernel.evaluate_with_reference(&m, &h, &state, &g).unwrap();
        let strong = op.p1(&q.values.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        let weak = op.apply(&h).unwrap();
        let (rw, rs) = (op.inner(&h, &weak), op.inner(&h, &strong));
        assert!((rw - rs).abs() < 0.02 * rs.abs(), "{rw} vs {rs}");
    }

    #[test]
    fn hard_sphere_null_space_and_round_trip() {
        let g = VelocityGrid::new([8, 8, 8], 5.0, 1.0).unwrap();
        let model = CollisionModel::hard_sphere(AngularQuadrature::new(8, 8).unwrap()).unwrap();
        let op = build_linearized(&Primitive::at_rest(1.0, 1.0), &g, &model).unwrap();
        for j in 0..5 {
            let chi = op.basis().chi(j);
            let l = op.apply(&chi).unwrap();
            assert!(op.inner(&l, &l).sqrt() <= 1e-6 * op.inner(&chi, &chi).sqrt());
        }
        let h0 = random_micro(&op, 6);
        let rhs = op.apply(&h0).unwrap();
        let h = op.solve(&rhs).unwrap();
        let diff: Vec<f64> = h.iter().zip(&h0).map(|(a, b)| a - b).collect();
        assert!(op.inner(&diff, &diff).sqrt() < 1e-9 * op.inner(&h0, &h0).sqrt());
    }
}
