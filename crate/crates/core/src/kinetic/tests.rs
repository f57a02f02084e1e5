use super::*;
use crate::collision::AngularQuadrature;

fn small(epsilon: f64, theta_plus: f64) -> KineticConfig {
    KineticConfig {
        nx: 40,
        half_width: 2.0,
        velocity_counts: [12, 8, 8],
        t_final: 0.2,
        snapshots: vec![0.2],
        ..KineticConfig::bgk(epsilon, 1.0, theta_plus)
    }
}

fn state_for(config: &KineticConfig) -> KineticState {
    let grid = config.velocity_grid().unwrap();
    let table = config.transport_table(&grid).unwrap();
    let profile = config.wave_profile(&table).unwrap();
    let wave = eulerian_wave(&profile, config.epsilon, 0.0, &config.cells()).unwrap();
    let f = init_from_wave(&wave, &grid).unwrap();
    KineticState::new(f, grid, config.epsilon, config.model.clone(), config.transport, config.far_field(), 10).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[test]
fn constant_maxwellian_is_a_fixed_point() {
    let config = small(0.05, 1.0);
    let mut s = state_for(&config);
    let f0 = s.f.values.clone();
    for _ in 0..10 {
        let dt = s.max_dt();
        kinetic_step(&mut s, dt).unwrap();
    }
    let scale = max_abs(&f0);
    let diff = s.f.values.iter().zip(&f0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-13 * scale, "{diff}");
}

#[test]
fn initial_data_is_maxwellian_with_the_wave_moments() {
    let config = small(0.05, 1.2);
    let s = state_for(&config);
    let wave = eulerian_wave(&s_profile(&config), config.epsilon, 0.0, &config.cells()).unwrap();
    let p = s.primitives().unwrap();
    for (i, q) in p.iter().enumerate() {
        assert!((q.rho - wave.rho[i]).abs() < 1e-12);
        assert!((q.theta - wave.theta[i]).abs() < 1e-12);
        assert!((q.u[0] - wave.u[i][0]).abs() < 1e-12);
        let slot = s.f.slice(i);
        let g = local_basis(slot, &s.grid).unwrap().p1(slot, &s.grid);
        assert!(max_abs(&g) < 1e-12 * max_abs(slot));
    }
}

fn s_profile(config: &KineticConfig) -> SelfSimilarProfile {
    let grid = config.velocity_grid().unwrap();
    config.wave_profile(&config.transport_table(&grid).unwrap()).unwrap()
}

#[test]
fn collision_substep_conserves_cellwise() {
    let config = small(0.05, 1.2);
    let mut s = state_for(&config);
    // push the data off equilibrium first
    for _ in 0..3 {
        s.transport(s.max_dt());
    }
    let before: Vec<[f64; 5]> = (0..s.f.nx()).map(|i| cell_invariants(s.f.slice(i), &s.grid)).collect();
    collision_substep(&mut s, 0.01).unwrap();
    for (i, b) in before.iter().enumerate() {
        let a = cell_invariants(s.f.slice(i), &s.grid);
        for q in 0..5 {
            assert!((a[q] - b[q]).abs() <= 1e-12 * b[0].abs().max(b[4].abs()), "cell {i} moment {q}");
        }
    }
}

#[test]
fn relaxation_limits() {
    let mut kin = state_for(&small(0.05, 1.2));
    kin.epsilon = 1e3;
    for _ in 0..3 {
        kin.transport(kin.max_dt());
    }
    let mut free = KineticState { hs: None, ..clone_state(&kin) };
    let dt = kin.max_dt();
    kinetic_step(&mut kin, dt).unwrap();
    free.transport(0.5 * dt);
    free.transport(0.5 * dt);
    let diff = kin.f.values.iter().zip(&free.f.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-5 * max_abs(&free.f.values), "{diff}");

    let mut stiff = clone_state(&kin);
    stiff.epsilon = 1e-4;
    collision_substep(&mut stiff, dt).unwrap();
    for i in 0..stiff.f.nx() {
        let slot = stiff.f.slice(i);
        let g = local_basis(slot, &stiff.grid).unwrap().p1(slot, &stiff.grid);
        assert!(max_abs(&g) < 1e-12 * max_abs(slot));
    }
}

fn clone_state(s: &KineticState) -> KineticState {
    KineticState {
        f: s.f.clone(),
        grid: s.grid.clone(),
        epsilon: s.epsilon,
        model: s.model.clone(),
        scheme: s.scheme,
        t: s.t,
        steps: s.steps,
        ledger: s.ledger,
        left: s.left.clone(),
        right: s.right.clone(),
        refresh_interval: s.refresh_interval,
        hs: None,
    }
}

#[test]
fn rejects_cfl_violation_and_odd_grid() {
    let config = small(0.05, 1.2);
    let mut s = state_for(&config);
    let dt = 1.5 * s.max_dt();
    assert!(matches!(kinetic_step(&mut s, dt), Err(Error::Stability(_))));
    assert!(KineticConfig { nx: 41, ..config }.validate().is_err());
}

#[test]
fn run_keeps_ledger_and_lands_on_snapshots() {
    let config = KineticConfig { snapshots: vec![0.1, 0.2], ..small(0.05, 1.2) };
    let traj = kinetic_run(&config).unwrap();
    assert_eq!(traj.snapshots.len(), 2);
    assert!((traj.snapshots[1].t - 0.2).abs() < 1e-15);
    for s in &traj.snapshots {
        for a in 0..5 {
            let d = s.ledger.totals[a] - traj.initial_ledger.totals[a] - s.ledger.inflow[a];
            assert!(d.abs() < 1e-12 * traj.initial_ledger.totals[0], "moment {a}: {d}");
        }
    }
    assert!(traj.mass_drift() < 1e-12);
    // the wave velocity at the origin is positive for an increasing profile
    assert!(traj.snapshots[1].ledger.mass_through_origin > 0.0);
}

#[test]
fn micro_norm_shrinks_with_epsilon() {
    let coarse = kinetic_run(&small(0.1, 1.2)).unwrap();
    let fine = kinetic_run(&small(0.01, 1.2)).unwrap();
    assert!(fine.micro_trace[0].1 < coarse.micro_trace[0].1);
}

#[test]
fn snapshot_round_trip() {
    let config = KineticConfig { snapshots: vec![0.0], t_final: 0.0, ..small(0.05, 1.2) };
    let traj = kinetic_run(&config).unwrap();
    let snap = &traj.snapshots[0];
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        t: snap.t,
        epsilon: config.epsilon,
        nx: snap.f.nx(),
        nv: snap.f.nv,
        x: snap.f.x.clone(),
        dx: snap.f.dx,
        velocity: config.velocity_grid().unwrap().metadata(),
        provenance: serde_json::json!({ "config_hash": "abc" }),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    write_snapshot(&path, &header, &snap.f).unwrap();
    let (h, f) = read_snapshot(&path).unwrap();
    assert_eq!(h, header);
    assert_eq!(f.values, snap.f.values);
}

#[test]
fn hard_sphere_step_conserves_and_keeps_equilibrium() {
    let config = KineticConfig {
        nx: 8,
        half_width: 1.0,
        velocity_counts: [8, 8, 8],
        model: CollisionModel::hard_sphere(AngularQuadrature::default()).unwrap(),
        ..KineticConfig::bgk(0.1, 1.0, 1.0)
    };
    let grid = config.velocity_grid().unwrap();
    let m = discrete_maxwellian(&Primitive::at_rest(1.0, 1.0), &grid).unwrap();
    let mut f = DistributionField::zeros(config.cells(), config.dx(), grid.len(), Frame::Eulerian);
    for i in 0..f.nx() {
        f.slice_mut(i).copy_from_slice(&m);
    }
    let mut s =
        KineticState::new(f, grid, 0.1, config.model.clone(), config.transport, config.far_field(), 10).unwrap();
    let dt = s.max_dt();
    kinetic_step(&mut s, dt).unwrap();
    let diff = (0..s.f.nx()).flat_map(|i| s.f.slice(i).iter().zip(&m).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>());
    assert!(diff.fold(0.0, f64::max) < 1e-12 * max_abs(&m));

    // a perturbed slice relaxes without losing its invariants
    for i in 0..s.f.nx() {
        let slot = s.f.slice_mut(i);
        for (k, v) in slot.iter_mut().enumerate() {
            *v *= 1.0 + 0.05 * ((k + i) as f64).sin();
        }
    }
    let before: Vec<[f64; 5]> = (0..s.f.nx()).map(|i| cell_invariants(s.f.slice(i), &s.grid)).collect();
    collision_substep(&mut s, dt).unwrap();
    for (i, b) in before.iter().enumerate() {
        let a = cell_invariants(s.f.slice(i), &s.grid);
        for q in 0..5 {
            assert!((a[q] - b[q]).abs() <= 1e-12 * b[0].max(b[4]), "cell {i} moment {q}: {} vs {}", a[q], b[q]);
        }
    }
}
