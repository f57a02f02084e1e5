//! The run pipelines behind each subcommand. Every pipeline certifies the
//! collision model first and records the result in its provenance.

use std::fs;
use std::path::Path;
use std::sync::Mutex;

use hydrolimit::diagnostics::{
    convergence_sweep_with, energy_report, growth_check, member_errors, CertificationReference, EnergyReport,
    ErrorSample, GrowthCheck, SweepOptions, COMPONENT_NAMES, DEFAULT_GROWTH_SLACK,
};
use hydrolimit::kinetic::{write_snapshot, SnapshotHeader, SNAPSHOT_FORMAT};
use hydrolimit::{
    build_wave, certify_operator_properties, kinetic_run, ns_run, wave_residuals, CertificationReport, CollisionKind,
    FluidField, FluidRunConfig, GlobalMaxwellian, KineticTrajectory, Primitive, VelocityGrid,
};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{
    config_hash, sha256_hex, tag, FileEntry, Manifest, OutputDir, Provenance, CODE_VERSION, MANIFEST, RESOLVED_CONFIG,
};
use crate::CliError;

pub fn dispatch(command: &str, config: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let mut dir = OutputDir::create(out)?;
    dir.write_json(RESOLVED_CONFIG, config)?;
    let report = certify(config)?;
    let certification = CertificationReference::from(&report);
    let velocity_grid = match command {
        "certify" => certify_grid(config)?.metadata(),
        _ => kinetic_grid(config)?.metadata(),
    };
    let provenance = Provenance {
        command: command.to_string(),
        code_version: CODE_VERSION.to_string(),
        config_hash: config_hash(config),
        seed: config.seed,
        velocity_grid,
        certification: Some(certification),
    };
    let summary = match command {
        "certify" => {
            dir.write_json("certification.json", &json!({ "provenance": provenance, "report": report }))?;
            json!({ "passed": report.passed, "sigma": report.sigma, "trials": report.trials })
        }
        _ if !report.passed => {
            dir.write_json("certification.json", &json!({ "provenance": provenance, "report": report }))?;
            dir.finish(provenance)?;
            return Err(hydrolimit::Error::Certification(format!(
                "{:?} operator failed certification (sigma = {:.4e})",
                report.model, report.sigma
            ))
            .into());
        }
        "wave" => wave(config, &provenance, &mut dir)?,
        "kinetic" => kinetic(config, &provenance, &mut dir)?,
        "fluid" => fluid(config, &provenance, &mut dir)?,
        "sweep" => sweep(config, &provenance, &mut dir, &report)?,
        other => {
            return Err(CliError::Config { key: "command".into(), constraint: format!("unknown command `{other}`") })
        }
    };
    let manifest = dir.finish(provenance)?;
    Ok(json!({
        "command": command,
        "out": out.display().to_string(),
        "config_hash": manifest.provenance.config_hash,
        "files": manifest.files.len(),
        "summary": summary,
    }))
}

fn kinetic_grid(config: &RunConfig) -> Result<VelocityGrid, CliError> {
    let p = &config.physics;
    Ok(VelocityGrid::new(config.velocity.counts, config.velocity.extent_multiplier, p.theta_minus.max(p.theta_plus))?)
}

fn certify_grid(config: &RunConfig) -> Result<VelocityGrid, CliError> {
    let c = &config.certify;
    Ok(VelocityGrid::new(c.counts, config.velocity.extent_multiplier, c.theta)?)
}

fn certify(config: &RunConfig) -> Result<CertificationReport, CliError> {
    let c = &config.certify;
    let state = Primitive::new(c.rho, c.u, c.theta)?;
    let mstar = GlobalMaxwellian { rho: c.rho, u: [0.0; 3], theta: c.theta_star };
    let model = config.model.build()?;
    Ok(certify_operator_properties(&model, &state, &mstar, c.trials, &certify_grid(config)?, config.seed)?)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn wave(config: &RunConfig, provenance: &Provenance, dir: &mut OutputDir) -> Result<Value, CliError> {
    let w = &config.wave;
    let kc = config.kinetic_config(w.epsilon, vec![0.0])?;
    let grid = kc.velocity_grid()?;
    let table = kc.transport_table(&grid)?;
    let profile = kc.wave_profile(&table)?;
    let rows: Vec<Vec<f64>> =
        (0..profile.eta.len()).map(|i| vec![profile.eta[i], profile.theta_hat[i], profile.dtheta_hat[i]]).collect();
    dir.write_csv("profile.csv", &["eta", "theta_hat", "dtheta_hat"], &rows)?;

    let x = linspace(-w.half_width, w.half_width, w.n);
    let mut residuals = Vec::new();
    for &t in &w.times {
        let field = build_wave(&profile, w.epsilon, t, &x)?;
        let (r1, r2) = wave_residuals(&field, &table)?;
        let rows: Vec<Vec<f64>> = (0..x.len())
            .map(|i| vec![x[i], field.vbar[i], field.ubar[i][0], field.thetabar[i], r1[i], r2[i]])
            .collect();
        dir.write_csv(&format!("wave_t{}.csv", tag(t)), &["x", "vbar", "u1bar", "thetabar", "R1", "R2"], &rows)?;
        residuals.push(json!({ "t": t, "r1_max": max_abs(&r1), "r2_max": max_abs(&r2) }));
    }
    let report = json!({
        "provenance": provenance,
        "epsilon": w.epsilon,
        "delta": profile.delta,
        "p_plus": profile.p_plus,
        "profile": {
            "residual_norm": profile.residual_norm,
            "newton_iterations": profile.newton_iterations,
            "monotone": profile.is_monotone(),
            "tail": profile.tail,
        },
        "residuals": residuals,
    });
    dir.write_json("wave.json", &report)?;
    Ok(json!({ "delta": profile.delta, "profile_residual": profile.residual_norm, "residuals": residuals }))
}

/// Moment profiles, micro trace, error table, energy trace and snapshots of
/// one kinetic run.
struct KineticOutputs<'a> {
    traj: &'a KineticTrajectory,
    grid: &'a VelocityGrid,
    errors: &'a [ErrorSample],
    energy: Option<&'a EnergyReport>,
    snapshots: bool,
    provenance: &'a Provenance,
}

const ENERGY_HEADER: [&str; 10] = [
    "t",
    "tau",
    COMPONENT_NAMES[0],
    COMPONENT_NAMES[1],
    COMPONENT_NAMES[2],
    COMPONENT_NAMES[3],
    COMPONENT_NAMES[4],
    COMPONENT_NAMES[5],
    "e6",
    "growth_ratio",
];

fn energy_rows(report: &EnergyReport) -> Vec<Vec<f64>> {
    report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.t, r.tau];
            row.extend(r.components);
            row.extend([r.e6, r.growth_ratio]);
            row
        })
        .collect()
}

impl KineticOutputs<'_> {
    fn write(&self, dir: &mut OutputDir) -> Result<(), CliError> {
        let traj = self.traj;
        for s in &traj.snapshots {
            let m = &s.moments;
            let rows: Vec<Vec<f64>> =
                (0..m.x.len()).map(|i| vec![m.x[i], m.rho[i], m.u[i][0], m.u[i][1], m.u[i][2], m.theta[i]]).collect();
            dir.write_csv(&format!("moments_t{}.csv", tag(s.t)), &["x", "rho", "u1", "u2", "u3", "theta"], &rows)?;
            if self.snapshots {
                let rel = format!("snapshots/t{}.bin", tag(s.t));
                let header = SnapshotHeader {
                    format: SNAPSHOT_FORMAT.to_string(),
                    t: s.t,
                    epsilon: traj.config.epsilon,
                    nx: s.f.nx(),
                    nv: self.grid.len(),
                    x: s.f.x.clone(),
                    dx: s.f.dx,
                    velocity: self.grid.metadata(),
                    provenance: json!({
                        "config_hash": self.provenance.config_hash,
                        "code_version": self.provenance.code_version,
                    }),
                };
                write_snapshot(&dir.path(&rel)?, &header, &s.f)?;
                dir.register(&rel)?;
            }
        }
        let trace: Vec<Vec<f64>> = traj.micro_trace.iter().map(|(t, m)| vec![*t, *m]).collect();
        dir.write_csv("micro_trace.csv", &["t", "micro_norm"], &trace)?;
        let errors: Vec<Vec<f64>> = self.errors.iter().map(|e| vec![e.t, e.sup_error_away, e.max_error]).collect();
        dir.write_csv("errors.csv", &["t", "sup_error_away", "max_error"], &errors)?;
        if let Some(report) = self.energy {
            dir.write_csv("energy.csv", &ENERGY_HEADER, &energy_rows(report))?;
        }
        Ok(())
    }
}

fn sweep_options(
    config: &RunConfig,
    h: f64,
    reference: hydrolimit::diagnostics::ErrorReference,
    energy: bool,
) -> SweepOptions {
    SweepOptions {
        h,
        reference,
        energy,
        certification_trials: config.certify.trials,
        seed: config.seed,
        ..SweepOptions::new(h)
    }
}

fn kinetic(config: &RunConfig, provenance: &Provenance, dir: &mut OutputDir) -> Result<Value, CliError> {
    let k = &config.kinetic;
    let kc = config.kinetic_config(k.epsilon, k.snapshots.clone())?;
    let grid = kc.velocity_grid()?;
    let traj = kinetic_run(&kc)?;
    let options = sweep_options(config, k.h, k.reference, false);
    let errors = member_errors(&traj, &grid, &options)?;
    let bgk = config.model.kind == CollisionKind::Bgk;
    let energy = if k.energy && bgk { Some(energy_report(&traj, &[1.0; 6])?) } else { None };
    let growth: Option<GrowthCheck> = match &energy {
        Some(e) if e.rows.len() >= 2 => Some(growth_check(e, DEFAULT_GROWTH_SLACK)?),
        _ => None,
    };
    KineticOutputs {
        traj: &traj,
        grid: &grid,
        errors: &errors,
        energy: energy.as_ref(),
        snapshots: k.write_snapshots,
        provenance,
    }
    .write(dir)?;
    let last = traj.snapshots.last().map(|s| s.ledger);
    let note = (k.energy && !bgk).then_some("energy trace is available for the BGK model only");
    let sup_error = errors.iter().map(|e| e.sup_error_away).fold(0.0, f64::max);
    let report = json!({
        "provenance": provenance,
        "epsilon": k.epsilon,
        "delta": kc.delta(),
        "mstar": kc.mstar(),
        "steps": traj.steps,
        "mass_drift": traj.mass_drift(),
        "negative_values": traj.negative_values,
        "initial_ledger": traj.initial_ledger,
        "final_ledger": last,
        "reference": k.reference,
        "h": k.h,
        "errors": errors,
        "sup_error": sup_error,
        "growth": growth,
        "energy_note": note,
    });
    dir.write_json("kinetic.json", &report)?;
    Ok(json!({
        "steps": traj.steps,
        "mass_drift": traj.mass_drift(),
        "sup_error": sup_error,
        "growth_passed": growth.as_ref().map(|g| g.passed),
    }))
}

fn fluid(config: &RunConfig, provenance: &Provenance, dir: &mut OutputDir) -> Result<Value, CliError> {
    let f = &config.fluid;
    let kc = config.kinetic_config(f.epsilon, vec![0.0])?;
    let grid = kc.velocity_grid()?;
    let table = kc.transport_table(&grid)?;
    let profile = kc.wave_profile(&table)?;
    let field = FluidField::from_wave(&profile, f.epsilon, 0.0, f.half_width, f.n)?;
    let run = FluidRunConfig { t_final: f.t_final, snapshots: f.snapshots.clone(), cfl: f.cfl };
    let traj = ns_run(field, table, &run, Some((&profile, 0.0)))?;
    let start = traj.snapshots.first().map(|s| s.ledger);
    let mut ledger = Vec::new();
    for s in &traj.snapshots {
        let fl = &s.field;
        let rows: Vec<Vec<f64>> =
            (0..fl.len()).map(|i| vec![fl.x[i], fl.v[i], fl.u[i][0], fl.u[i][1], fl.u[i][2], fl.theta[i]]).collect();
        dir.write_csv(&format!("fluid_t{}.csv", tag(fl.t)), &["x", "v", "u1", "u2", "u3", "theta"], &rows)?;
        ledger.push(json!({
            "t": fl.t,
            "ledger": s.ledger,
            "drift_since_first": start.map(|l| s.ledger.drift_since(&l)),
            "max_wave_deviation": s.deviation.as_ref().map(|d| max_abs(d)),
        }));
    }
    let report = json!({
        "provenance": provenance,
        "epsilon": f.epsilon,
        "steps": traj.steps,
        "max_step_drift": traj.max_step_drift,
        "snapshots": ledger,
    });
    dir.write_json("fluid.json", &report)?;
    Ok(json!({ "steps": traj.steps, "max_step_drift": traj.max_step_drift }))
}

fn sweep(
    config: &RunConfig,
    provenance: &Provenance,
    dir: &mut OutputDir,
    certification: &CertificationReport,
) -> Result<Value, CliError> {
    let s = &config.sweep;
    let base = config.kinetic_config(s.epsilons[0], s.snapshots.clone())?;
    let grid = base.velocity_grid()?;
    let energy = s.energy && config.model.kind == CollisionKind::Bgk;
    let options = sweep_options(config, s.h, s.reference, energy);
    let written: Mutex<Vec<FileEntry>> = Mutex::new(Vec::new());
    let root = dir.root().to_path_buf();
    let on_member =
        |member: &hydrolimit::diagnostics::SweepMember, traj: &KineticTrajectory| -> hydrolimit::Result<()> {
            if !s.member_outputs {
                return Ok(());
            }
            let sub = format!("eps_{}", tag(member.epsilon));
            let io = |e: CliError| hydrolimit::Error::Io(e.to_string());
            let mut member_dir = OutputDir::create(&root.join(&sub)).map_err(io)?;
            KineticOutputs {
                traj,
                grid: &grid,
                errors: &member.samples,
                energy: member.energy.as_ref(),
                snapshots: config.kinetic.write_snapshots,
                provenance,
            }
            .write(&mut member_dir)
            .map_err(io)?;
            let entries =
                member_dir.into_entries().into_iter().map(|f| FileEntry { path: format!("{sub}/{}", f.path), ..f });
            written.lock().expect("no panics while holding the lock").extend(entries);
            Ok(())
        };
    let report = convergence_sweep_with(&s.epsilons, &base, &options, Some(certification), &on_member)?;
    dir.extend(written.into_inner().expect("no panics while holding the lock"));

    let slope = report.rate.slope().unwrap_or(f64::NAN);
    let whole = report.whole_line_rate.slope().unwrap_or(f64::NAN);
    let rows: Vec<Vec<f64>> = report
        .members
        .iter()
        .map(|m| vec![m.epsilon, m.sup_error, m.max_error, slope, whole, m.steps as f64, m.mass_drift])
        .collect();
    dir.write_csv(
        "convergence.csv",
        &["epsilon", "sup_error", "max_error", "fitted_slope", "whole_line_slope", "steps", "mass_drift"],
        &rows,
    )?;
    let rows: Vec<Vec<f64>> = report
        .members
        .iter()
        .flat_map(|m| m.samples.iter().map(move |e| vec![m.epsilon, e.t, e.sup_error_away, e.max_error]))
        .collect();
    dir.write_csv("errors.csv", &["epsilon", "t", "sup_error_away", "max_error"], &rows)?;

    let mut growth = Vec::new();
    if energy {
        let mut header = vec!["epsilon"];
        header.extend(ENERGY_HEADER);
        let mut rows = Vec::new();
        for m in &report.members {
            let e = m.energy.as_ref().expect("energy requested");
            rows.extend(energy_rows(e).into_iter().map(|r| std::iter::once(m.epsilon).chain(r).collect::<Vec<f64>>()));
            if e.rows.len() >= 2 {
                growth.push(json!({ "epsilon": m.epsilon, "check": growth_check(e, DEFAULT_GROWTH_SLACK)? }));
            }
        }
        dir.write_csv("energy.csv", &header, &rows)?;
    }
    dir.write_json("convergence.json", &json!({ "provenance": provenance, "report": report, "growth": growth }))?;
    Ok(json!({
        "epsilons": report.epsilons,
        "sup_errors": report.members.iter().map(|m| m.sup_error).collect::<Vec<_>>(),
        "slope": report.rate.slope(),
        "strictly_decreasing": report.strictly_decreasing,
        "monotone_within_tolerance": report.monotone_within_tolerance,
    }))
}

/// Verifies the hashes listed in `out/manifest.json` and summarizes the
/// command's main report.
pub fn report(out: &Path) -> Result<Value, CliError> {
    let path = out.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut mismatched = Vec::new();
    for f in &manifest.files {
        match fs::read(out.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            _ => mismatched.push(f.path.clone()),
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Io(format!("files missing or changed since the run: {}", mismatched.join(", "))));
    }
    let main = match manifest.provenance.command.as_str() {
        "wave" => "wave.json",
        "certify" => "certification.json",
        "kinetic" => "kinetic.json",
        "fluid" => "fluid.json",
        _ => "convergence.json",
    };
    let doc: Value = serde_json::from_str(&fs::read_to_string(out.join(main))?)?;
    let pick = |keys: &[&str]| -> Value {
        keys.iter()
            .filter_map(|k| doc.pointer(k).map(|v| (k.trim_start_matches('/').replace('/', "."), v.clone())))
            .collect::<serde_json::Map<_, _>>()
            .into()
    };
    let summary = match manifest.provenance.command.as_str() {
        "wave" => pick(&["/delta", "/profile/residual_norm", "/profile/tail", "/residuals"]),
        "certify" => pick(&["/report/model", "/report/sigma", "/report/passed", "/report/trials"]),
        "kinetic" => pick(&["/epsilon", "/steps", "/mass_drift", "/sup_error", "/growth/passed"]),
        "fluid" => pick(&["/epsilon", "/steps", "/max_step_drift"]),
        _ => pick(&[
            "/report/epsilons",
            "/report/rate/fit/slope",
            "/report/strictly_decreasing",
            "/report/monotone_within_tolerance",
            "/report/certification/passed",
        ]),
    };
    Ok(json!({
        "command": manifest.provenance.command,
        "config_hash": manifest.provenance.config_hash,
        "code_version": manifest.provenance.code_version,
        "files_verified": manifest.files.len(),
        "summary": summary,
    }))
}
