use crate::error::{check_len, Result};
use crate::micromacro::local_basis;
use crate::velocity::VelocityGrid;

/// BGK relaxation `ν0 (M[f] − f)`.
///
/// With the moment-exact local Maxwellian `M[f] = P0 f` this is `−ν0 P1 f`;
/// the projection is applied a second time as the conservation correction,
/// which removes the rounding left in the invariant moments.
pub fn bgk_collision(f: &[f64], grid: &VelocityGrid, nu0: f64) -> Result<Vec<f64>> {
    check_len(grid.len(), f.len())?;
    let basis = local_basis(f, grid)?;
    let mut out = basis.p1(f, grid);
    for v in out.iter_mut() {
        *v *= -nu0;
    }
    basis.p1_in_place(&mut out, grid);
    Ok(out)
}
