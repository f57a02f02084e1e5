//! Direct quadrature of the hard-sphere collision operator on the velocity grid.
//!
//! For a fixed difference index `D = k − l` and a fixed sphere node, the shift
//! `s = (g·Ω)Ω` of the post-collision velocities is the same for every pair,
//! so the trilinear weights and the set of admissible `k` (an index box) are
//! computed once per `(D, Ω)` and the inner loop is a plain strided sweep.
//!
//! Post-collision values are interpolated from `f / M_ref` rather than `f`.
//! Because `M_ref(ξ')M_ref(ξ*') = M_ref(ξ)M_ref(ξ*)`, the products of the
//! reference Maxwellian never need to be evaluated off the grid, and `Q(M, M)`
//! vanishes exactly whenever `M = M_ref`.

use rayon::prelude::*;

use super::{AngularQuadrature, FrequencyEnvelope};
use crate::error::{check_len, Error, Result};
use crate::micromacro::MacroBasis;
use crate::numerics::fit_line;
use crate::velocity::{maxwellian_of, moments_unchecked, primitive_from_conserved, Primitive, VelocityGrid};

/// Result of one hard-sphere evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct HardSphereOutput {
    pub values: Vec<f64>,
    /// Loss-term mass of collisions whose post-collision velocities left the grid.
    pub dropped_mass: f64,
}

/// Geometry of one `(D, Ω)` event family.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EventFamily {
    /// `|g·Ω|` times the sphere weight.
    pub coef: f64,
    /// Admissible `k` per axis, inclusive.
    pub lo: [usize; 3],
    pub hi: [usize; 3],
    /// Integer offset of the `ξ'` stencil base from `k`.
    pub off1: [isize; 3],
    /// Integer offset of the `ξ*'` stencil base from `k`.
    pub off2: [isize; 3],
    /// Trilinear corner weights, corner `c` has bits (axis0, axis1, axis2).
    pub w1: [f64; 8],
    pub w2: [f64; 8],
}

/// Precomputed sphere nodes and grid geometry for repeated evaluations.
#[derive(Debug, Clone)]
pub struct HardSphereKernel {
    counts: [usize; 3],
    spacing: [f64; 3],
    sphere: Vec<(f64, f64, f64)>,
}

impl HardSphereKernel {
    pub fn new(grid: &VelocityGrid, angular: &AngularQuadrature) -> Result<Self> {
        AngularQuadrature::new(angular.n_polar, angular.n_azimuth)?;
        Ok(Self { counts: grid.counts(), spacing: grid.spacing(), sphere: angular.nodes() })
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub(crate) fn padded_strides(&self) -> [usize; 3] {
        let n = self.counts;
        [(n[1] + 1) * (n[2] + 1), n[2] + 1, 1]
    }

    pub(crate) fn padded_len(&self) -> usize {
        let n = self.counts;
        (n[0] + 1) * (n[1] + 1) * (n[2] + 1)
    }

    /// Copies a grid slice into a zero-padded array with one extra plane per axis.
    pub(crate) fn pad(&self, v: &[f64]) -> Vec<f64> {
        let n = self.counts;
        let s = self.padded_strides();
        let mut out = vec![0.0; self.padded_len()];
        for i in 0..n[0] {
            for j in 0..n[1] {
                let src = (i * n[1] + j) * n[2];
                let dst = i * s[0] + j * s[1];
                out[dst..dst + n[2]].copy_from_slice(&v[src..src + n[2]]);
            }
        }
        out
    }

    /// Orthonormal frame `(ĝ, e1, e2)` for a difference index.
    fn frame(&self, d: [isize; 3]) -> Option<([f64; 3], [f64; 3], [f64; 3], f64)> {
        let g = [d[0] as f64 * self.spacing[0], d[1] as f64 * self.spacing[1], d[2] as f64 * self.spacing[2]];
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if norm == 0.0 {
            return None;
        }
        let gh = [g[0] / norm, g[1] / norm, g[2] / norm];
        // start from the coordinate axis least aligned with ĝ
        let a = (0..3).min_by(|&i, &j| gh[i].abs().partial_cmp(&gh[j].abs()).unwrap()).unwrap();
        let mut t = [0.0; 3];
        t[a] = 1.0;
        let dot = t[0] * gh[0] + t[1] * gh[1] + t[2] * gh[2];
        let mut e1 = [t[0] - dot * gh[0], t[1] - dot * gh[1], t[2] - dot * gh[2]];
        let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
        for v in e1.iter_mut() {
            *v /= n1;
        }
        let e2 = [gh[1] * e1[2] - gh[2] * e1[1], gh[2] * e1[0] - gh[0] * e1[2], gh[0] * e1[1] - gh[1] * e1[0]];
        Some((gh, e1, e2, norm))
    }

    /// All event families for one difference index; `None` entries are families
    /// with no admissible `k`.
    pub(crate) fn families(&self, d: [isize; 3], out: &mut Vec<EventFamily>) {
        out.clear();
        let Some((gh, e1, e2, gnorm)) = self.frame(d) else {
            return;
        };
        let n = self.counts;
        'nodes: for &(c, phi, w) in &self.sphere {
            let sn = (1.0 - c * c).max(0.0).sqrt();
            let (sp, cp) = phi.sin_cos();
            let mut s = [0.0; 3];
            for a in 0..3 {
                let omega = c * gh[a] + sn * (cp * e1[a] + sp * e2[a]);
                // shift of ξ' is −s, of ξ*' is +s, in index units
                s[a] = gnorm * c * omega / self.spacing[a];
            }
            let mut fam = EventFamily {
                coef: w * gnorm * c,
                lo: [0; 3],
                hi: [0; 3],
                off1: [0; 3],
                off2: [0; 3],
                w1: [0.0; 8],
                w2: [0.0; 8],
            };
            let mut t1 = [0.0; 3];
            let mut t2 = [0.0; 3];
            for a in 0..3 {
                let m1 = (-s[a]).floor();
                let m2 = s[a].floor();
                t1[a] = -s[a] - m1;
                t2[a] = s[a] - m2;
                let m1 = m1 as isize;
                let m2 = m2 as isize;
                let top1 = if t1[a] > 0.0 { n[a] as isize - 2 } else { n[a] as isize - 1 };
                let top2 = if t2[a] > 0.0 { n[a] as isize - 2 } else { n[a] as isize - 1 };
                // k − D ∈ [0, n−1], k + m1 ∈ [0, top1], k − D + m2 ∈ [0, top2]
                let lo = 0isize.max(d[a]).max(-m1).max(d[a] - m2);
                let hi = (n[a] as isize - 1).min(n[a] as isize - 1 + d[a]).min(top1 - m1).min(top2 + d[a] - m2);
                if lo > hi {
                    continue 'nodes;
                }
                fam.lo[a] = lo as usize;
                fam.hi[a] = hi as usize;
                fam.off1[a] = m1;
                fam.off2[a] = m2 - d[a];
            }
            for corner in 0..8 {
                let mut a1 = 1.0;
                let mut a2 = 1.0;
                for a in 0..3 {
                    let bit = (corner >> (2 - a)) & 1;
                    a1 *= if bit == 1 { t1[a] } else { 1.0 - t1[a] };
                    a2 *= if bit == 1 { t2[a] } else { 1.0 - t2[a] };
                }
                fam.w1[corner] = a1;
                fam.w2[corner] = a2;
            }
            out.push(fam);
        }
    }

    /// Difference indices with a nonzero relative velocity, grouped by first component.
    pub(crate) fn difference_planes(&self) -> Vec<isize> {
        let n0 = self.counts[0] as isize;
        (-(n0 - 1)..n0).collect()
    }

    pub(crate) fn differences_in_plane(&self, d0: isize) -> impl Iterator<Item = [isize; 3]> + '_ {
        let n1 = self.counts[1] as isize;
        let n2 = self.counts[2] as isize;
        (-(n1 - 1)..n1).flat_map(move |d1| (-(n2 - 1)..n2).map(move |d2| [d0, d1, d2]))
    }

    /// Sum of `coef` over all sphere nodes: `∫|g·Ω| dΩ = 2π|g|` up to rounding.
    pub(crate) fn cross_section(&self, d: [isize; 3]) -> f64 {
        match self.frame(d) {
            Some((_, _, _, gnorm)) => self.sphere.iter().map(|&(c, _, w)| w * gnorm * c).sum(),
            None => 0.0,
        }
    }

    /// Raw (uncorrected) bilinear operator in terms of `F = f/M_ref`, `G = g/M_ref`.
    ///
    /// Returns `(Σ coef MW_l (gain − loss), Σ coef MW_l · loss)` per `k`, both
    /// still to be multiplied by `½ M_ref,k`.
    fn accumulate(&self, ff: &[f64], gg: &[f64], mw: &[f64], same: bool) -> (Vec<f64>, Vec<f64>) {
        let nv = self.counts.iter().product::<usize>();
        let fp = self.pad(ff);
        let gp = self.pad(gg);
        let planes = self.difference_planes();
        let partials: Vec<(Vec<f64>, Vec<f64>)> = planes
            .par_iter()
            .map(|&d0| {
                let mut net = vec![0.0; nv];
                let mut kept = vec![0.0; nv];
                let mut fams = Vec::new();
                for d in self.differences_in_plane(d0) {
                    self.families(d, &mut fams);
                    for fam in &fams {
                        self.sweep(fam, d, &fp, &gp, ff, gg, mw, same, &mut net, &mut kept);
                    }
                }
                (net, kept)
            })
            .collect();
        // fixed-order reduction keeps results independent of the thread count
        let mut net = vec![0.0; nv];
        let mut kept = vec![0.0; nv];
        for (pn, pk) in &partials {
            for k in 0..nv {
                net[k] += pn[k];
                kept[k] += pk[k];
            }
        }
        (net, kept)
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn sweep(
        &self,
        fam: &EventFamily,
        d: [isize; 3],
        fp: &[f64],
        gp: &[f64],
        ff: &[f64],
        gg: &[f64],
        mw: &[f64],
        same: bool,
        net: &mut [f64],
        kept: &mut [f64],
    ) {
        let n = self.counts;
        let ps = self.padded_strides();
        let corner_offsets: [usize; 8] =
            std::array::from_fn(|c| ((c >> 2) & 1) * ps[0] + ((c >> 1) & 1) * ps[1] + (c & 1) * ps[2]);
        let len = fam.hi[2] - fam.lo[2] + 1;
        let dshift = (d[0] * (n[1] * n[2]) as isize + d[1] * n[2] as isize + d[2]) as usize;
        for k0 in fam.lo[0]..=fam.hi[0] {
            for k1 in fam.lo[1]..=fam.hi[1] {
                let k2 = fam.lo[2];
                let kbase = (k0 * n[1] + k1) * n[2] + k2;
                let lbase = kbase.wrapping_sub(dshift);
                let p1 = ((k0 as isize + fam.off1[0]) as usize) * ps[0]
                    + ((k1 as isize + fam.off1[1]) as usize) * ps[1]
                    + (k2 as isize + fam.off1[2]) as usize;
                let p2 = ((k0 as isize + fam.off2[0]) as usize) * ps[0]
                    + ((k1 as isize + fam.off2[1]) as usize) * ps[1]
                    + (k2 as isize + fam.off2[2]) as usize;
                let net_row = &mut net[kbase..kbase + len];
                let kept_row = &mut kept[kbase..kbase + len];
                let fk = &ff[kbase..kbase + len];
                let gk = &gg[kbase..kbase + len];
                let fl = &ff[lbase..lbase + len];
                let gl = &gg[lbase..lbase + len];
                let mwl = &mw[lbase..lbase + len];
                for j in 0..len {
                    let mut if1 = 0.0;
                    let mut if2 = 0.0;
                    for c in 0..8 {
                        if1 += fam.w1[c] * fp[p1 + corner_offsets[c] + j];
                        if2 += fam.w2[c] * fp[p2 + corner_offsets[c] + j];
                    }
                    let (gain, loss) = if same {
                        (2.0 * if1 * if2, 2.0 * fk[j] * fl[j])
                    } else {
                        let mut ig1 = 0.0;
                        let mut ig2 = 0.0;
                        for c in 0..8 {
                            ig1 += fam.w1[c] * gp[p1 + corner_offsets[c] + j];
                            ig2 += fam.w2[c] * gp[p2 + corner_offsets[c] + j];
                        }
                        (if1 * ig2 + if2 * ig1, fk[j] * gl[j] + fl[j] * gk[j])
                    };
                    let cw = fam.coef * mwl[j];
                    net_row[j] += cw * (gain - loss);
                    kept_row[j] += cw * loss;
                }
            }
        }
    }

    /// `Q(f, g)` with the reference Maxwellian taken from the moments of `(f+g)/2`,
    /// followed by the conservation correction.
    pub fn evaluate(&self, f: &[f64], g: &[f64], grid: &VelocityGrid) -> Result<HardSphereOutput> {
        check_len(grid.len(), f.len())?;
        check_len(grid.len(), g.len())?;
        if grid.counts() != self.counts {
            return Err(Error::Precondition("kernel was built for a different velocity grid".into()));
        }
        let avg: Vec<f64> = f.iter().zip(g).map(|(a, b)| 0.5 * (a + b)).collect();
        let state = primitive_from_conserved(&moments_unchecked(&avg, grid))?;
        self.evaluate_with_reference(f, g, &state, grid)
    }

    /// `Q(f, g)` against an explicit reference state.
    pub fn evaluate_with_reference(
        &self,
        f: &[f64],
        g: &[f64],
        reference: &Primitive,
        grid: &VelocityGrid,
    ) -> Result<HardSphereOutput> {
        check_len(grid.len(), f.len())?;
        check_len(grid.len(), g.len())?;
        reference.validate()?;
        let mref = maxwellian_of(reference, grid);
        if let Some(k) = mref.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::NonPhysical(format!(
                "reference Maxwellian underflows at node {k}; the velocity grid is too wide for this state"
            )));
        }
        let ff: Vec<f64> = f.iter().zip(&mref).map(|(a, m)| a / m).collect();
        let gg: Vec<f64> = g.iter().zip(&mref).map(|(a, m)| a / m).collect();
        let mw: Vec<f64> = grid.weights().iter().zip(&mref).map(|(w, m)| w * m).collect();
        let same = std::ptr::eq(f.as_ptr(), g.as_ptr());
        let (net, kept) = self.accumulate(&ff, &gg, &mw, same);
        let mut values: Vec<f64> = net.iter().zip(&mref).map(|(v, m)| 0.5 * m * v).collect();

        let full = self.full_loss(&ff, &gg, &mw);
        let mut dropped = 0.0;
        for k in 0..values.len() {
            dropped += grid.weights()[k] * 0.5 * mref[k] * (full[k] - kept[k]);
        }

        let basis = MacroBasis::with_weight(*reference, mref, grid)?;
        basis.p1_in_place(&mut values, grid);
        Ok(HardSphereOutput { values, dropped_mass: dropped })
    }

    /// Loss term with the exact angular integral and no events dropped.
    fn full_loss(&self, ff: &[f64], gg: &[f64], mw: &[f64]) -> Vec<f64> {
        let n = self.counts;
        let nv = ff.len();
        let sigma = self.cross_section_table();
        let span = [2 * n[0] - 1, 2 * n[1] - 1, 2 * n[2] - 1];
        (0..nv)
            .into_par_iter()
            .map(|k| {
                let (k0, k1, k2) = (k / (n[1] * n[2]), (k / n[2]) % n[1], k % n[2]);
                let mut acc = 0.0;
                for l in 0..nv {
                    let (l0, l1, l2) = (l / (n[1] * n[2]), (l / n[2]) % n[1], l % n[2]);
                    let idx = ((k0 + n[0] - 1 - l0) * span[1] + (k1 + n[1] - 1 - l1)) * span[2] + (k2 + n[2] - 1 - l2);
                    acc += sigma[idx] * mw[l] * (ff[k] * gg[l] + ff[l] * gg[k]);
                }
                acc
            })
            .collect()
    }

    /// `Σ_Ω coef` for every difference index, offset so index 0 is `D = −(n−1)`.
    pub(crate) fn cross_section_table(&self) -> Vec<f64> {
        let n = self.counts;
        let span = [2 * n[0] - 1, 2 * n[1] - 1, 2 * n[2] - 1];
        let mut out = vec![0.0; span[0] * span[1] * span[2]];
        for a in 0..span[0] {
            for b in 0..span[1] {
                for c in 0..span[2] {
                    let d = [
                        a as isize - (n[0] as isize - 1),
                        b as isize - (n[1] as isize - 1),
                        c as isize - (n[2] as isize - 1),
                    ];
                    out[(a * span[1] + b) * span[2] + c] = self.cross_section(d);
                }
            }
        }
        out
    }
}

/// Hard-sphere `Q(f, g)` on the grid (symmetrized bilinear form).
pub fn hard_sphere_q(
    f: &[f64],
    g: &[f64],
    grid: &VelocityGrid,
    angular: &AngularQuadrature,
) -> Result<HardSphereOutput> {
    HardSphereKernel::new(grid, angular)?.evaluate(f, g, grid)
}

/// Hard-sphere collision frequency `ν(ξ_k) = Σ_l w_l M_l ∫|g·Ω| dΩ`.
pub fn collision_frequency(grid: &VelocityGrid, maxwellian: &[f64], angular: &AngularQuadrature) -> Result<Vec<f64>> {
    check_len(grid.len(), maxwellian.len())?;
    let kernel = HardSphereKernel::new(grid, angular)?;
    let sigma = kernel.cross_section_table();
    let n = grid.counts();
    let span = [2 * n[0] - 1, 2 * n[1] - 1, 2 * n[2] - 1];
    let nv = grid.len();
    let mw: Vec<f64> = grid.weights().iter().zip(maxwellian).map(|(w, m)| w * m).collect();
    Ok((0..nv)
        .into_par_iter()
        .map(|k| {
            let (k0, k1, k2) = (k / (n[1] * n[2]), (k / n[2]) % n[1], k % n[2]);
            let mut acc = 0.0;
            for (l, m) in mw.iter().enumerate() {
                let (l0, l1, l2) = (l / (n[1] * n[2]), (l / n[2]) % n[1], l % n[2]);
                let idx = ((k0 + n[0] - 1 - l0) * span[1] + (k1 + n[1] - 1 - l1)) * span[2] + (k2 + n[2] - 1 - l2);
                acc += sigma[idx] * m;
            }
            acc
        })
        .collect())
}

/// Fits `ν ≤ c (1+|ξ|)^κ` and records `ν_lower = min ν`.
///
/// `κ` is the log-log slope of `ν` against `1+|ξ|` over the outer third of the
/// speeds present on the grid, clamped to `[0, 1]`; `c` is the smallest constant
/// making the bound hold at every node.
pub fn fit_envelope(grid: &VelocityGrid, nu: &[f64]) -> Result<FrequencyEnvelope> {
    check_len(grid.len(), nu.len())?;
    let speed: Vec<f64> = grid.nodes().iter().map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()).collect();
    let smax = speed.iter().cloned().fold(0.0, f64::max);
    // stay inside the inscribed ball so truncation of the box does not bias the fit
    let rmax = grid.half_width().iter().cloned().fold(f64::INFINITY, f64::min);
    let (lo, hi) = (0.55 * rmax, 0.9 * rmax.min(smax));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (s, v) in speed.iter().zip(nu) {
        if *s >= lo && *s <= hi {
            xs.push((1.0 + s).ln());
            ys.push(v.ln());
        }
    }
    let kappa = fit_line(&xs, &ys)?.slope.clamp(0.0, 1.0);
    let c = speed.iter().zip(nu).map(|(s, v)| v / (1.0 + s).powf(kappa)).fold(0.0, f64::max);
    let nu_lower = nu.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(nu_lower > 0.0) {
        return Err(Error::Certification(format!("collision frequency not positive (min {nu_lower})")));
    }
    Ok(FrequencyEnvelope { nu_lower, c, kappa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::{maxwellian, moments};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> (VelocityGrid, AngularQuadrature) {
        (VelocityGrid::new([8, 8, 8], 5.0, 1.0).unwrap(), AngularQuadrature::new(8, 8).unwrap())
    }

    #[test]
    fn reference_maxwellian_is_annihilated_exactly() {
        let (g, a) = small();
        let state = Primitive::at_rest(1.0, 1.0);
        let m = maxwellian_of(&state, &g);
        let k = HardSphereKernel::new(&g, &a).unwrap();
        let out = k.evaluate_with_reference(&m, &m, &state, &g).unwrap();
        let scale = m.iter().cloned().fold(0.0, f64::max);
        assert!(out.values.iter().all(|v| v.abs() < 1e-14 * scale));
    }

    #[test]
    fn symmetric_in_its_arguments() {
        let (g, a) = small();
        let m = maxwellian(1.0, [0.0; 3], 1.0, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f: Vec<f64> = m.iter().map(|v| v * (1.0 + 0.3 * rng.random_range(-1.0..1.0))).collect();
        let h: Vec<f64> = m.iter().map(|v| v * (1.0 + 0.3 * rng.random_range(-1.0..1.0))).collect();
        let k = HardSphereKernel::new(&g, &a).unwrap();
        let q1 = k.evaluate(&f, &h, &g).unwrap();
        let q2 = k.evaluate(&h, &f, &g).unwrap();
        let scale = q1.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (x, y) in q1.values.iter().zip(&q2.values) {
            assert!((x - y).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn self_collision_matches_general_path() {
        let (g, a) = small();
        let m = maxwellian(1.0, [0.0; 3], 1.0, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f: Vec<f64> = m.iter().map(|v| v * (1.0 + 0.3 * rng.random_range(-1.0..1.0))).collect();
        let copy = f.clone();
        let k = HardSphereKernel::new(&g, &a).unwrap();
        let q1 = k.evaluate(&f, &f, &g).unwrap();
        let q2 = k.evaluate(&f, &copy, &g).unwrap();
        let scale = q1.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (x, y) in q1.values.iter().zip(&q2.values) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn conserves_invariants_after_correction() {
        let (g, a) = small();
        let m = maxwellian(1.0, [0.1, 0.0, 0.0], 0.9, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = m.iter().map(|v| v * (1.0 + 0.5 * rng.random_range(-1.0..1.0))).collect();
        let out = hard_sphere_q(&f, &f, &g, &a).unwrap();
        let scale = g.integrate(&f.iter().map(|v| v.abs()).collect::<Vec<_>>());
        for v in moments(&out.values, &g).unwrap().as_array() {
            assert!(v.abs() < 1e-12 * scale, "{v}");
        }
        assert!(out.dropped_mass >= 0.0);
    }

    #[test]
    fn frequency_matches_closed_form_sphere_integral() {
        let (g, a) = small();
        let m = maxwellian(1.0, [0.0; 3], 1.0, &g).unwrap();
        let nu = collision_frequency(&g, &m, &a).unwrap();
        // direct evaluation of 2π Σ w_l M_l |ξ_k − ξ_l| at one node
        let k = g.index(3, 4, 5);
        let xk = g.nodes()[k];
        let direct: f64 = g
            .nodes()
            .iter()
            .zip(g.weights())
            .zip(&m)
            .map(|((x, w), mv)| {
                let d = [xk[0] - x[0], xk[1] - x[1], xk[2] - x[2]];
                w * mv * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            })
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI;
        assert!((nu[k] - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn frequency_is_stable_under_angular_refinement() {
        let g = VelocityGrid::new([9, 9, 9], 5.0, 1.0).unwrap();
        let m = maxwellian(1.0, [0.0; 3], 1.0, &g).unwrap();
        let coarse = collision_frequency(&g, &m, &AngularQuadrature::new(8, 8).unwrap()).unwrap();
        let fine = collision_frequency(&g, &m, &AngularQuadrature::new(16, 16).unwrap()).unwrap();
        let k = g.index(4, 4, 4);
        assert!((coarse[k] - fine[k]).abs() < 1e-4 * fine[k]);
    }
}
