use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact_wave::EulerianWave;
use crate::error::{check_len, invalid, Error, Result};
use crate::kinetic::init_from_wave;
use crate::micromacro::{discrete_maxwellian, GlobalMaxwellian};
use crate::numerics::{fit_line, LineFit};
use crate::velocity::{moments_unchecked, primitive_from_conserved, DistributionField, Primitive, VelocityGrid};

/// What the kinetic solution is compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorReference {
    /// Two global Maxwellians with a jump at `X = 0`.
    #[default]
    Inviscid,
    /// Local Maxwellians of the viscous contact wave.
    ViscousWave,
}

/// Inviscid contact discontinuity sampled on cell centres: the left state
/// for `x < 0`, the right state otherwise.
pub fn inviscid_reference(
    x: &[f64],
    left: &Primitive,
    right: &Primitive,
    grid: &VelocityGrid,
) -> Result<DistributionField> {
    if x.len() < 2 {
        return Err(invalid("x", "need at least two cells"));
    }
    let ml = discrete_maxwellian(left, grid)?;
    let mr = discrete_maxwellian(right, grid)?;
    let mut f = DistributionField::zeros(x.to_vec(), x[1] - x[0], grid.len(), crate::velocity::Frame::Eulerian);
    for (i, xi) in x.iter().enumerate() {
        f.slice_mut(i).copy_from_slice(if *xi < 0.0 { &ml } else { &mr });
    }
    Ok(f)
}

/// Local Maxwellians of the viscous wave on its own grid.
pub fn viscous_reference(wave: &EulerianWave, grid: &VelocityGrid) -> Result<DistributionField> {
    init_from_wave(wave, grid)
}

/// `e(x) = ∫ |f − M_ref|² / M* dξ` per cell.
pub fn pointwise_error_profile(
    f: &DistributionField,
    reference: &DistributionField,
    mstar: &GlobalMaxwellian,
    grid: &VelocityGrid,
) -> Result<Vec<f64>> {
    let nv = grid.len();
    check_len(nv, f.nv)?;
    check_len(nv, reference.nv)?;
    check_len(f.values.len(), reference.values.len())?;
    let thetas = reference
        .values
        .par_chunks(nv)
        .map(|s| primitive_from_conserved(&moments_unchecked(s, grid)).map(|p| p.theta))
        .collect::<Result<Vec<f64>>>()?;
    let lo = thetas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = thetas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mstar.check_window_range(lo, hi)?;
    let m = mstar.slice(grid)?;
    let w = grid.weights();
    Ok(f.values
        .par_chunks(nv)
        .zip(reference.values.par_chunks(nv))
        .map(|(a, b)| (0..nv).map(|k| w[k] * (a[k] - b[k]).powi(2) / m[k]).sum())
        .collect())
}

/// `sup_{|x| ≥ h} √e(x)`.
pub fn sup_error_away(x: &[f64], e: &[f64], h: f64) -> Result<f64> {
    check_len(x.len(), e.len())?;
    if x.is_empty() {
        return Err(invalid("x", "empty profile"));
    }
    let reach = x[0].abs().max(x[x.len() - 1].abs());
    if !(h > 0.0) || h > reach {
        return Err(invalid("h", format!("{h} must be positive and within the domain (|x| <= {reach})")));
    }
    Ok(x.iter().zip(e).filter(|(x, _)| x.abs() >= h).map(|(_, e)| e.max(0.0).sqrt()).fold(0.0, f64::max))
}

/// Largest `√e` over the whole line.
pub fn max_error(e: &[f64]) -> f64 {
    e.iter().map(|e| e.max(0.0).sqrt()).fold(0.0, f64::max)
}

/// `e(x) ≈ A exp(−c x² / (ε(1+t)))` fitted on `lo ≤ |x| ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTailFit {
    pub c: f64,
    pub amplitude: f64,
    pub fit: LineFit,
}

pub fn error_tail_fit(x: &[f64], e: &[f64], epsilon: f64, t: f64, lo: f64, hi: f64) -> Result<ErrorTailFit> {
    check_len(x.len(), e.len())?;
    let scale = epsilon * (1.0 + t);
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(e)
        .filter(|(x, e)| x.abs() >= lo && x.abs() <= hi && **e > 0.0)
        .map(|(x, e)| (x * x / scale, e.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::Precondition(format!("only {} positive samples in the tail window", xs.len())));
    }
    let fit = fit_line(&xs, &ys)?;
    Ok(ErrorTailFit { c: -fit.slope, amplitude: fit.intercept.exp(), fit })
}
