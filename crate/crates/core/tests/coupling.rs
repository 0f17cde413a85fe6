use levy_coupling::coupling::*;
use levy_coupling::diagnostics::energy_distance_test;
use levy_coupling::drift::{linear_drift, stable_potential_drift, DriftCondition};
use levy_coupling::psi::build_psi;
use levy_coupling::rng::stream;
use levy_coupling::stable_noise::{sample_jump_in_band, StableSpec};

#[test]
fn restricted_stable_law_is_reflection_invariant() {
    let x = [0.3, -0.2];
    let y = [-0.1, 0.4];
    let mut rng = stream(12, 0);
    let mut z = [0.0; 2];
    let draws: Vec<Vec<f64>> = (0..2000)
        .map(|_| {
            sample_jump_in_band(1.5, 0.01, 1.0, &mut rng, &mut z);
            z.to_vec()
        })
        .collect();
    let (first, second) = draws.split_at(1000);
    let mirrored: Vec<Vec<f64>> = second.iter().map(|z| reflect(&x, &y, z)).collect();
    assert!(energy_distance_test(first, &mirrored, 49, 3).p_value > 0.01);
}

#[test]
fn synchronous_difference_follows_drift_ode() {
    let spec = StableSpec::new(2, 1.5).unwrap();
    let kappa = 0.8;
    let field = linear_drift(kappa, 2).unwrap();
    let psi = build_psi(&spec, &field.claimed_condition.unwrap()).unwrap();
    let cfg = SchemeConfig {
        mode: CouplingMode::Synchronous,
        ..SchemeConfig::for_l0(1.0)
    };
    let grid = uniform_grid(2.0, 0.25).unwrap();
    let path = simulate_coupled_path(
        &[1.0, 0.5],
        &[0.0, -0.5],
        &field,
        &spec,
        &psi,
        &cfg,
        2.0,
        &grid,
        &mut stream(1, 0),
    )
    .unwrap();
    let r0 = 2f64.sqrt();
    for s in &path.records {
        let expected = r0 * (-kappa * s.t).exp();
        assert!((s.distance() - expected).abs() <= 1e-8 * r0, "t = {}", s.t);
    }
}

#[test]
fn far_pair_contracts_continuously() {
    let spec = StableSpec::new(1, 1.5).unwrap();
    let field = stable_potential_drift(1.5, 1).unwrap();
    let psi = build_psi(&spec, &field.claimed_condition.unwrap()).unwrap();
    let cfg = SchemeConfig::for_l0(1.0);
    let grid = uniform_grid(0.6, 1e-3).unwrap();
    let path = simulate_coupled_path(
        &[1.0],
        &[-1.0],
        &field,
        &spec,
        &psi,
        &cfg,
        0.6,
        &grid,
        &mut stream(4, 0),
    )
    .unwrap();
    let hit = path.hit_l0_time.unwrap();
    let mut prev = 2.0f64;
    // Reflection may push r back up once it has dipped below L0.
    for s in path.records.iter().take_while(|s| s.t < hit) {
        let r = s.distance();
        assert!(r <= prev + 1e-12, "{r} > {prev} at t = {}", s.t);
        // |dr/dt| <= 3 r² here, so grid increments stay small.
        assert!(prev - r <= 3.0 * prev * prev * 1e-3 * 1.01);
        assert!(r <= 1.0 / (s.t + 0.5) + 1e-8);
        prev = r;
    }
    assert!(hit <= 0.5 + 1e-6, "{hit}");
    let cond = DriftCondition::new(1.0, 1.0, 1.0, 3.0).unwrap();
    assert!(hit <= hitting_time_bound(2.0, &cond).unwrap().t0);
}

#[test]
fn ensemble_stays_finite_within_budget() {
    let spec = StableSpec::new(1, 1.7).unwrap();
    let field = stable_potential_drift(1.5, 1).unwrap();
    let psi = build_psi(&spec, &field.claimed_condition.unwrap()).unwrap();
    let cfg = SchemeConfig::for_l0(1.0);
    let grid = uniform_grid(1.0, 0.1).unwrap();
    let job = EnsembleSpec {
        x0: &[3.0],
        y0: &[-2.0],
        field: &field,
        spec: &spec,
        psi: &psi,
        cfg: &cfg,
        horizon: 1.0,
        record_grid: &grid,
    };
    let paths = run_ensemble(&job, 32, 9).unwrap();
    for p in &paths {
        assert!(p
            .records
            .iter()
            .all(|s| s.x.iter().chain(&s.y).all(|v| v.is_finite())));
        assert!(p.jumps + p.steps < cfg.max_events);
    }
}

#[test]
fn compensation_is_inert_outside_reflection_zone() {
    // Far apart with synchronous coupling only, so the band is never used.
    let spec = StableSpec::new(1, 1.5).unwrap();
    let field = stable_potential_drift(1.5, 1).unwrap();
    let psi = build_psi(&spec, &field.claimed_condition.unwrap()).unwrap();
    let grid = uniform_grid(0.5, 0.1).unwrap();
    let run = |compensate: bool| {
        let cfg = SchemeConfig {
            compensate_small: compensate,
            mode: CouplingMode::Synchronous,
            ..SchemeConfig::for_l0(1.0)
        };
        let job = EnsembleSpec {
            x0: &[0.3],
            y0: &[0.0],
            field: &field,
            spec: &spec,
            psi: &psi,
            cfg: &cfg,
            horizon: 0.5,
            record_grid: &grid,
        };
        run_ensemble(&job, 16, 21).unwrap()
    };
    assert_eq!(run(false), run(true));
}
