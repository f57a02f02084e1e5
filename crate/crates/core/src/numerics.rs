//! Small numerical building blocks shared by the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Solves a tridiagonal system in place with the Thomas algorithm.
///
/// `lower[i]` couples row `i` to `i-1` (ignored for `i == 0`), `upper[i]`
/// couples row `i` to `i+1` (ignored for the last row).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::ShapeMismatch { expected: n, found: lower.len().min(upper.len()).min(rhs.len()) });
    }
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Singular("zero pivot in tridiagonal solve".into()));
    }
    c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular(format!("zero pivot in tridiagonal row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Cumulative trapezoid integral of samples `y` at abscissae `x`, starting at 0.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
        out.push(acc);
    }
    out
}

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual_rms: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::ShapeMismatch { expected: n, found: y.len() });
    }
    if n < 2 {
        return Err(invalid("points", "a line fit needs at least two points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(invalid("points", "abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, residual_rms: (ss_res / nf).sqrt(), r_squared, points: n })
}

/// Cubic Hermite interpolation on one interval given endpoint values and
/// slopes; `s` is the local coordinate in `[0, 1]` and `h` the interval width.
#[inline]
pub fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing `x`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::ShapeMismatch { expected: n, found: y.len() });
        }
        if n < 2 {
            return Err(invalid("x", "spline needs at least two nodes"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("x", "spline nodes must be strictly increasing"));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut lower = vec![0.0; k];
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for j in 0..k {
                let i = j + 1;
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                lower[j] = h0;
                diag[j] = 2.0 * (h0 + h1);
                upper[j] = h1;
                rhs[j] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
            m[1..n - 1].copy_from_slice(&rhs);
        }
        Ok(Self { x, y, m })
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value and first derivative; linear extrapolation outside the nodes.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let i = self.locate(t);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        if t < x0 || t > x1 {
            let (edge, mi) = if t < x0 { (i, i) } else { (i + 1, i + 1) };
            let slope = self.slope_at_node(edge, mi);
            return (self.y[edge] + slope * (t - self.x[edge]), slope);
        }
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d =
            (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        (v, d)
    }

    fn slope_at_node(&self, node: usize, _m: usize) -> f64 {
        let n = self.x.len();
        if node == 0 {
            let h = self.x[1] - self.x[0];
            (self.y[1] - self.y[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0
        } else {
            let h = self.x[n - 1] - self.x[n - 2];
            (self.y[n - 1] - self.y[n - 2]) / h + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = mid - half * z;
        nodes[n - 1 - i] = mid + half * z;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

#[inline]
pub fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Linear interpolation of `(xs, ys)` at `t`, clamped to the end values.
/// `xs` must be increasing.
pub fn interp_linear(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let n = xs.len();
    if t <= xs[0] {
        return ys[0];
    }
    if t >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= t) - 1;
    let s = (t - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + s * (ys[i + 1] - ys[i])
}

/// Cubic (Catmull–Rom) interpolation on non-uniform increasing nodes,
/// clamped to the end values outside the range.
pub fn interp_cubic(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let n = xs.len();
    if n < 4 {
        return interp_linear(xs, ys, t);
    }
    if t <= xs[0] {
        return ys[0];
    }
    if t >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= t) - 1;
    let slope = |j: usize| -> f64 {
        if j == 0 {
            (ys[1] - ys[0]) / (xs[1] - xs[0])
        } else if j == n - 1 {
            (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2])
        } else {
            // three-point derivative, second order on non-uniform nodes
            let h0 = xs[j] - xs[j - 1];
            let h1 = xs[j + 1] - xs[j];
            let d0 = (ys[j] - ys[j - 1]) / h0;
            let d1 = (ys[j + 1] - ys[j]) / h1;
            (h1 * d0 + h0 * d1) / (h0 + h1)
        }
    };
    let h = xs[i + 1] - xs[i];
    let s = (t - xs[i]) / h;
    hermite(ys[i], ys[i + 1], slope(i), slope(i + 1), h, s)
}

/// Centered finite-difference derivative on a uniform grid with one-sided
/// second-order stencils at the ends.
pub fn gradient_uniform(y: &[f64], dx: f64) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let g = (y[1] - y[0]) / dx;
            d[0] = g;
            d[1] = g;
        }
        return d;
    }
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dx);
    for i in 1..n - 1 {
        d[i] = (y[i + 1] - y[i - 1]) / (2.0 * dx);
    }
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * dx);
    d
}

/// Second-order three-point derivative on a nonuniform, increasing grid, with
/// one-sided three-point stencils at the ends.
pub fn gradient_nonuniform(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let g = (y[1] - y[0]) / (x[1] - x[0]);
            d[0] = g;
            d[1] = g;
        }
        return d;
    }
    // derivative at x[c] of the parabola through points a, b, c
    let three = |c: usize, a: usize, b: usize| -> f64 {
        let (xa, xb, xc) = (x[a], x[b], x[c]);
        y[a] * (xc - xb) / ((xa - xb) * (xa - xc))
            + y[b] * (xc - xa) / ((xb - xa) * (xb - xc))
            + y[c] * (2.0 * xc - xa - xb) / ((xc - xa) * (xc - xb))
    };
    d[0] = three(0, 1, 2);
    for i in 1..n - 1 {
        d[i] = three(i, i - 1, i + 1);
    }
    d[n - 1] = three(n - 1, n - 2, n - 3);
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense_solution() {
        // [2 1 0; 1 3 1; 0 1 4] x = [3, 5, 5] has x = [1, 1, 1]
        let lower = [0.0, 1.0, 1.0];
        let diag = [2.0, 3.0, 4.0];
        let upper = [1.0, 1.0, 0.0];
        let mut rhs = [3.0, 5.0, 5.0];
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs).unwrap();
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6, 0.0, 1.0);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(11)).sum();
        assert!((integral - 1.0 / 12.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn line_fit_recovers_exact_slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.25 * v - 1.0).collect();
        let fit = fit_line(&x, &y).unwrap();
        assert!((fit.slope - 0.25).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
    }

    #[test]
    fn spline_reproduces_cubic_interior_and_derivative() {
        let x: Vec<f64> = (0..41).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::new(x, y).unwrap();
        let (v, d) = s.eval_with_derivative(1.03);
        assert!((v - 1.03f64.sin()).abs() < 1e-6);
        assert!((d - 1.03f64.cos()).abs() < 1e-4);
    }

    #[test]
    fn cumulative_trapezoid_of_linear_is_exact() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t).collect();
        let c = cumulative_trapezoid(&x, &y);
        assert!((c[10] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nonuniform_gradient_is_exact_for_parabolas() {
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.3).powf(1.4)).collect();
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t * t - t + 0.5).collect();
        for (t, d) in x.iter().zip(gradient_nonuniform(&x, &y)) {
            assert!((d - (4.0 * t - 1.0)).abs() < 1e-11);
        }
    }
}
