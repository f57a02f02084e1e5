//! Discrete velocity space: grids, quadrature, Maxwellians and the moment map.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};

/// Gas constant, normalized so that the internal energy equals the temperature.
pub const GAS_CONSTANT: f64 = 2.0 / 3.0;

pub const MIN_AXIS_COUNT: usize = 8;
pub const MIN_EXTENT_MULTIPLIER: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Product trapezoid rule on a truncated box.
    Trapezoid,
}

impl QuadratureRule {
    pub fn name(self) -> &'static str {
        match self {
            QuadratureRule::Trapezoid => "trapezoid",
        }
    }
}

/// Run metadata describing a velocity grid; written into output headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub counts: [usize; 3],
    pub extent: [[f64; 2]; 3],
    pub rule: QuadratureRule,
    pub extent_multiplier: f64,
    pub theta_max: f64,
}

/// Uniform product grid in ξ with trapezoid weights, symmetric about 0.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    counts: [usize; 3],
    half_width: [f64; 3],
    spacing: [f64; 3],
    axes: [Vec<f64>; 3],
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    extent_multiplier: f64,
    theta_max: f64,
    rule: QuadratureRule,
}

impl VelocityGrid {
    /// Builds a grid spanning `±extent_multiplier·√(R·theta_max)` on each axis.
    pub fn new(counts: [usize; 3], extent_multiplier: f64, theta_max: f64) -> Result<Self> {
        if counts.iter().any(|&c| c < MIN_AXIS_COUNT) {
            return Err(invalid("counts", format!("each axis needs at least {MIN_AXIS_COUNT} nodes, got {counts:?}")));
        }
        if !(theta_max > 0.0) || !theta_max.is_finite() {
            return Err(invalid("theta_max", format!("must be positive, got {theta_max}")));
        }
        if !(extent_multiplier >= MIN_EXTENT_MULTIPLIER) || !extent_multiplier.is_finite() {
            return Err(invalid(
                "extent_multiplier",
                format!("must be at least {MIN_EXTENT_MULTIPLIER}, got {extent_multiplier}"),
            ));
        }
        let half = extent_multiplier * (GAS_CONSTANT * theta_max).sqrt();
        let mut spacing = [0.0; 3];
        let mut axes: [Vec<f64>; 3] = Default::default();
        let mut axis_weights: [Vec<f64>; 3] = Default::default();
        for a in 0..3 {
            let n = counts[a];
            let h = 2.0 * half / (n - 1) as f64;
            spacing[a] = h;
            let centre = 0.5 * (n - 1) as f64;
            // (j - centre) is exact in binary, so the node set is exactly symmetric
            axes[a] = (0..n).map(|j| (j as f64 - centre) * h).collect();
            axis_weights[a] = (0..n).map(|j| if j == 0 || j == n - 1 { 0.5 * h } else { h }).collect();
        }
        let total = counts[0] * counts[1] * counts[2];
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for i in 0..counts[0] {
            for j in 0..counts[1] {
                for l in 0..counts[2] {
                    nodes.push([axes[0][i], axes[1][j], axes[2][l]]);
                    weights.push(axis_weights[0][i] * axis_weights[1][j] * axis_weights[2][l]);
                }
            }
        }
        Ok(Self {
            counts,
            half_width: [half; 3],
            spacing,
            axes,
            nodes,
            weights,
            extent_multiplier,
            theta_max,
            rule: QuadratureRule::Trapezoid,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn half_width(&self) -> [f64; 3] {
        self.half_width
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.counts[1] + j) * self.counts[2] + l
    }

    /// Largest |ξ1| on the grid.
    pub fn xi1_max(&self) -> f64 {
        self.half_width[0]
    }

    /// Volume of the truncated box.
    pub fn volume(&self) -> f64 {
        self.half_width.iter().map(|h| 2.0 * h).product()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn metadata(&self) -> GridMetadata {
        GridMetadata {
            counts: self.counts,
            extent: [
                [-self.half_width[0], self.half_width[0]],
                [-self.half_width[1], self.half_width[1]],
                [-self.half_width[2], self.half_width[2]],
            ],
            rule: self.rule,
            extent_multiplier: self.extent_multiplier,
            theta_max: self.theta_max,
        }
    }
}

/// Builds the product grid used throughout a run.
pub fn build_velocity_grid(counts: [usize; 3], extent_multiplier: f64, theta_max: f64) -> Result<VelocityGrid> {
    VelocityGrid::new(counts, extent_multiplier, theta_max)
}

/// Primitive macroscopic state (density, velocity, temperature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

impl Primitive {
    pub fn new(rho: f64, u: [f64; 3], theta: f64) -> Result<Self> {
        let s = Self { rho, u, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn at_rest(rho: f64, theta: f64) -> Self {
        Self { rho, u: [0.0; 3], theta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::NonPhysical(format!("density must be positive, got {}", self.rho)));
        }
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(Error::NonPhysical(format!("temperature must be positive, got {}", self.theta)));
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonPhysical(format!("velocity must be finite, got {:?}", self.u)));
        }
        Ok(())
    }

    pub fn pressure(&self) -> f64 {
        GAS_CONSTANT * self.rho * self.theta
    }

    pub fn specific_volume(&self) -> f64 {
        1.0 / self.rho
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * (self.u[0] * self.u[0] + self.u[1] * self.u[1] + self.u[2] * self.u[2])
    }

    pub fn conserved(&self) -> FluidMoments {
        FluidMoments {
            rho: self.rho,
            momentum: [self.rho * self.u[0], self.rho * self.u[1], self.rho * self.u[2]],
            energy: self.rho * (self.theta + self.kinetic_energy()),
        }
    }
}

/// The five conserved moments: mass, momentum and total energy densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidMoments {
    pub rho: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl FluidMoments {
    pub fn as_array(&self) -> [f64; 5] {
        [self.rho, self.momentum[0], self.momentum[1], self.momentum[2], self.energy]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { rho: a[0], momentum: [a[1], a[2], a[3]], energy: a[4] }
    }
}

/// Evaluates the Maxwellian at a single velocity.
#[inline]
pub fn maxwellian_at(state: &Primitive, xi: &[f64; 3]) -> f64 {
    let rt = GAS_CONSTANT * state.theta;
    let norm = state.rho / (2.0 * std::f64::consts::PI * rt).powf(1.5);
    let d0 = xi[0] - state.u[0];
    let d1 = xi[1] - state.u[1];
    let d2 = xi[2] - state.u[2];
    norm * (-(d0 * d0 + d1 * d1 + d2 * d2) / (2.0 * rt)).exp()
}

/// Local Maxwellian sampled on the grid nodes.
pub fn maxwellian(rho: f64, u: [f64; 3], theta: f64, grid: &VelocityGrid) -> Result<Vec<f64>> {
    let state = Primitive::new(rho, u, theta)?;
    Ok(maxwellian_of(&state, grid))
}

pub(crate) fn maxwellian_of(state: &Primitive, grid: &VelocityGrid) -> Vec<f64> {
    grid.nodes().iter().map(|xi| maxwellian_at(state, xi)).collect()
}

/// Discrete mass, momentum and energy of a distribution slice.
pub fn moments(f: &[f64], grid: &VelocityGrid) -> Result<FluidMoments> {
    check_len(grid.len(), f.len())?;
    Ok(moments_unchecked(f, grid))
}

pub(crate) fn moments_unchecked(f: &[f64], grid: &VelocityGrid) -> FluidMoments {
    let mut acc = [0.0; 5];
    for ((xi, w), v) in grid.nodes().iter().zip(grid.weights()).zip(f) {
        let wf = w * v;
        acc[0] += wf;
        acc[1] += wf * xi[0];
        acc[2] += wf * xi[1];
        acc[3] += wf * xi[2];
        acc[4] += wf * 0.5 * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
    }
    FluidMoments::from_array(acc)
}

/// Inverts the moment map with `E = θ`.
pub fn primitive_from_conserved(m: &FluidMoments) -> Result<Primitive> {
    if !(m.rho > 0.0) || !m.rho.is_finite() {
        return Err(Error::NonPhysical(format!("density must be positive, got {}", m.rho)));
    }
    let u = [m.momentum[0] / m.rho, m.momentum[1] / m.rho, m.momentum[2] / m.rho];
    let theta = m.energy / m.rho - 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::NonPhysical(format!("internal energy must be positive, got temperature {theta}")));
    }
    Ok(Primitive { rho: m.rho, u, theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Eulerian,
    Lagrangian,
}

/// A distribution function on a uniform spatial grid times a velocity grid,
/// stored cell-major (`values[cell * nv + k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    pub values: Vec<f64>,
    pub x: Vec<f64>,
    pub dx: f64,
    pub nv: usize,
    pub frame: Frame,
}

impl DistributionField {
    pub fn zeros(x: Vec<f64>, dx: f64, nv: usize, frame: Frame) -> Self {
        let n = x.len() * nv;
        Self { values: vec![0.0; n], x, dx, nv, frame }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn slice(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.nv..(cell + 1) * self.nv]
    }

    pub fn slice_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.values[cell * self.nv..(cell + 1) * self.nv]
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.x.len() * self.nv, self.values.len())?;
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonPhysical(format!("non-finite distribution entry at flat index {i}")));
        }
        Ok(())
    }

    /// Number of strictly negative entries (tolerated, tracked as a diagnostic).
    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|&&v| v < 0.0).count()
    }
}
