//! Run configuration: one JSON document, every key optional, defaults
//! materialized and validated before anything runs.

use hydrolimit::collision::{AngularQuadrature, CollisionKind, CollisionModel};
use hydrolimit::diagnostics::ErrorReference;
use hydrolimit::kinetic::MAX_CFL;
use hydrolimit::{GlobalMaxwellian, KineticConfig, SelfSimilarOptions, TransportScheme, VelocityGrid};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub v_minus: f64,
    /// Temperature of the reference Maxwellian `M*`; `0.9 min θ` when absent.
    pub theta_star: Option<f64>,
}

impl Default for Physics {
    fn default() -> Self {
        Self { theta_minus: 1.0, theta_plus: 1.2, v_minus: 1.0, theta_star: None }
    }
}

impl Physics {
    pub fn p_plus(&self) -> f64 {
        hydrolimit::GAS_CONSTANT * self.theta_minus / self.v_minus
    }

    pub fn v_plus(&self) -> f64 {
        self.v_minus * self.theta_plus / self.theta_minus
    }

    pub fn delta(&self) -> f64 {
        (self.theta_plus - self.theta_minus).abs()
    }

    pub fn mstar(&self) -> GlobalMaxwellian {
        let mut m =
            GlobalMaxwellian::default_for(1.0 / self.v_minus, 1.0 / self.v_plus(), self.theta_minus, self.theta_plus);
        if let Some(t) = self.theta_star {
            m.theta = t;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: CollisionKind,
    pub nu0: f64,
    pub angular: [usize; 2],
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { kind: CollisionKind::Bgk, nu0: 1.0, angular: [8, 8] }
    }
}

impl ModelSection {
    pub fn build(&self) -> hydrolimit::Result<CollisionModel> {
        match self.kind {
            CollisionKind::Bgk => CollisionModel::bgk(self.nu0),
            CollisionKind::HardSphere => {
                CollisionModel::hard_sphere(AngularQuadrature::new(self.angular[0], self.angular[1])?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VelocitySection {
    pub counts: [usize; 3],
    pub extent_multiplier: f64,
}

impl Default for VelocitySection {
    fn default() -> Self {
        Self { counts: [16, 12, 12], extent_multiplier: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSection {
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// Lagrangian output grid `[-half_width, half_width]` with `n` nodes.
    pub half_width: f64,
    pub n: usize,
}

impl Default for WaveSection {
    fn default() -> Self {
        Self { epsilon: 0.01, times: vec![0.0, 1.0, 3.0], half_width: 4.0, n: 801 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
    pub theta_star: f64,
    pub trials: usize,
    /// Velocity grid of the certification; the dense hard-sphere assembly
    /// scales with the cube of its size.
    pub counts: [usize; 3],
}

impl Default for CertifySection {
    fn default() -> Self {
        Self { rho: 1.0, u: [0.0; 3], theta: 1.0, theta_star: 0.85, trials: 100, counts: [12, 12, 12] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticSection {
    pub epsilon: f64,
    pub nx: usize,
    pub half_width: f64,
    pub t_final: f64,
    pub snapshots: Vec<f64>,
    pub cfl: f64,
    pub transport: TransportScheme,
    pub refresh_interval: usize,
    pub table_nodes: usize,
    /// Distance from the interface used for the error away from it.
    pub h: f64,
    pub reference: ErrorReference,
    /// Energy trace (BGK only).
    pub energy: bool,
    pub write_snapshots: bool,
}

impl Default for KineticSection {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            nx: 400,
            half_width: 8.0,
            t_final: 2.0,
            snapshots: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            cfl: MAX_CFL,
            transport: TransportScheme::Minmod,
            refresh_interval: 10,
            table_nodes: 9,
            h: 0.5,
            reference: ErrorReference::Inviscid,
            energy: true,
            write_snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidSection {
    pub epsilon: f64,
    pub n: usize,
    pub half_width: f64,
    pub t_final: f64,
    pub snapshots: Vec<f64>,
    pub cfl: f64,
}

impl Default for FluidSection {
    fn default() -> Self {
        Self { epsilon: 0.05, n: 200, half_width: 3.0, t_final: 1.0, snapshots: vec![0.0, 0.5, 1.0], cfl: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    pub h: f64,
    /// Snapshot times of every member; the diffusive time `h²/ε` is added.
    pub snapshots: Vec<f64>,
    pub energy: bool,
    pub reference: ErrorReference,
    /// Write moments, energy traces and binary snapshots per member.
    pub member_outputs: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.1, 0.05, 0.025, 0.0125],
            h: 0.5,
            snapshots: vec![0.25, 0.5, 1.0, 2.0],
            energy: true,
            reference: ErrorReference::Inviscid,
            member_outputs: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the randomized certification trials.
    pub seed: u64,
    pub physics: Physics,
    pub model: ModelSection,
    pub velocity: VelocitySection,
    pub profile: SelfSimilarOptions,
    pub wave: WaveSection,
    pub certify: CertifySection,
    pub kinetic: KineticSection,
    pub fluid: FluidSection,
    pub sweep: SweepSection,
}

fn fail(key: &str, constraint: impl Into<String>) -> CliError {
    CliError::Config { key: key.to_string(), constraint: constraint.into() }
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(fail(key, format!("must be positive and finite, got {v}")))
    }
}

fn times(key: &str, t: &[f64], t_final: f64) -> Result<(), CliError> {
    if let Some(bad) = t.iter().find(|t| !(**t >= 0.0 && **t <= t_final)) {
        return Err(fail(key, format!("time {bad} lies outside [0, t_final = {t_final}]")));
    }
    Ok(())
}

/// Applies `a.b.c=value` overrides to a JSON document; the value is parsed as
/// JSON when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) =
        assignment.split_once('=').ok_or_else(|| fail(assignment, "override must have the form key.path=value"))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, k) in keys.iter().enumerate() {
        if !node.is_object() {
            return Err(fail(path, format!("`{}` is not a section", keys[..i].join("."))));
        }
        let map = node.as_object_mut().expect("checked object");
        if i + 1 == keys.len() {
            map.insert(k.to_string(), value);
            return Ok(());
        }
        node = map.entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Parses a JSON document (or nothing), applies overrides and validates.
pub fn parse_config(text: Option<&str>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut doc: Value = match text {
        Some(t) => serde_json::from_str(t).map_err(|e| fail("<config>", format!("invalid JSON: {e}")))?,
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let config: RunConfig = serde_json::from_value(doc).map_err(|e| fail("<config>", e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.physics;
        positive("physics.theta_minus", p.theta_minus)?;
        positive("physics.theta_plus", p.theta_plus)?;
        positive("physics.v_minus", p.v_minus)?;
        let (lo, hi) = (p.theta_minus.min(p.theta_plus), p.theta_minus.max(p.theta_plus));
        let ts = p.mstar().theta;
        if !(ts < lo && ts > 0.5 * hi) {
            return Err(fail(
                "physics.theta_star",
                format!("theta* = {ts} violates the window theta/2 < theta* < theta for theta in [{lo}, {hi}]"),
            ));
        }

        self.model.build().map_err(|e| fail("model", e.to_string()))?;
        let v = &self.velocity;
        VelocityGrid::new(v.counts, v.extent_multiplier, hi).map_err(|e| fail("velocity", e.to_string()))?;
        self.profile.validate().map_err(|e| fail("profile", e.to_string()))?;

        let w = &self.wave;
        positive("wave.epsilon", w.epsilon)?;
        positive("wave.half_width", w.half_width)?;
        if w.n < 3 {
            return Err(fail("wave.n", "need at least 3 nodes"));
        }
        if w.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(fail("wave.times", "times must be nonnegative"));
        }

        let c = &self.certify;
        positive("certify.rho", c.rho)?;
        positive("certify.theta", c.theta)?;
        if !(0.5 * c.theta < c.theta_star && c.theta_star < c.theta) {
            return Err(fail(
                "certify.theta_star",
                format!("theta* = {} violates the window theta/2 < theta* < theta = {}", c.theta_star, c.theta),
            ));
        }
        if c.trials == 0 {
            return Err(fail("certify.trials", "need at least one trial"));
        }
        VelocityGrid::new(c.counts, v.extent_multiplier, c.theta).map_err(|e| fail("certify.counts", e.to_string()))?;

        let k = &self.kinetic;
        positive("kinetic.epsilon", k.epsilon)?;
        positive("kinetic.half_width", k.half_width)?;
        if k.nx < 4 || k.nx % 2 != 0 {
            return Err(fail("kinetic.nx", format!("must be even and at least 4, got {}", k.nx)));
        }
        if !(k.cfl > 0.0 && k.cfl <= MAX_CFL) {
            return Err(fail("kinetic.cfl", format!("must lie in (0, {MAX_CFL}], got {}", k.cfl)));
        }
        if !(k.t_final >= 0.0) {
            return Err(fail("kinetic.t_final", "must be nonnegative"));
        }
        times("kinetic.snapshots", &k.snapshots, k.t_final)?;
        if k.snapshots.is_empty() {
            return Err(fail("kinetic.snapshots", "need at least one snapshot time"));
        }
        if !(k.h > 0.0 && k.h < k.half_width) {
            return Err(fail("kinetic.h", format!("must lie in (0, half_width = {})", k.half_width)));
        }
        if k.refresh_interval == 0 {
            return Err(fail("kinetic.refresh_interval", "must be at least 1"));
        }

        let f = &self.fluid;
        positive("fluid.epsilon", f.epsilon)?;
        positive("fluid.half_width", f.half_width)?;
        if f.n < 4 {
            return Err(fail("fluid.n", "need at least 4 cells"));
        }
        if !(f.cfl > 0.0 && f.cfl <= 1.0) {
            return Err(fail("fluid.cfl", "must lie in (0, 1]"));
        }
        times("fluid.snapshots", &f.snapshots, f.t_final)?;

        let s = &self.sweep;
        if s.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(fail("sweep.epsilons", "list must be strictly decreasing"));
        }
        if s.epsilons.len() < 3 {
            return Err(fail("sweep.epsilons", format!("need at least three values, got {}", s.epsilons.len())));
        }
        if s.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(fail("sweep.epsilons", "values must be positive"));
        }
        if !(s.h > 0.0 && s.h < k.half_width) {
            return Err(fail("sweep.h", format!("must lie in (0, kinetic.half_width = {})", k.half_width)));
        }
        times("sweep.snapshots", &s.snapshots, k.t_final)?;
        Ok(())
    }

    /// Kinetic configuration at a given `ε`, built from the shared sections.
    pub fn kinetic_config(&self, epsilon: f64, snapshots: Vec<f64>) -> hydrolimit::Result<KineticConfig> {
        let p = &self.physics;
        let k = &self.kinetic;
        let config = KineticConfig {
            epsilon,
            theta_minus: p.theta_minus,
            theta_plus: p.theta_plus,
            v_minus: p.v_minus,
            nx: k.nx,
            half_width: k.half_width,
            velocity_counts: self.velocity.counts,
            extent_multiplier: self.velocity.extent_multiplier,
            model: self.model.build()?,
            t_final: k.t_final,
            snapshots,
            cfl: k.cfl,
            transport: k.transport,
            refresh_interval: k.refresh_interval,
            table_nodes: k.table_nodes,
            profile: self.profile,
            mstar: Some(p.mstar()),
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_keys_and_parse_json() {
        let mut v = Value::Object(Default::default());
        apply_override(&mut v, "sweep.epsilons=[0.2,0.1,0.05]").unwrap();
        apply_override(&mut v, "model.kind=hard_sphere").unwrap();
        assert_eq!(v["sweep"]["epsilons"][2], 0.05);
        assert_eq!(v["model"]["kind"], "hard_sphere");
        assert!(apply_override(&mut v, "novalue").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config(Some(r#"{"wave": {"epsilon": 0.1, "typo": 1}}"#), &[]).unwrap_err();
        assert!(e.to_string().contains("typo"), "{e}");
    }
}
