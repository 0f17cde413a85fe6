//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed. Pass criterion
//! numbers as arguments to run a subset, e.g. `cargo test --test acceptance -- 4 5`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use itertools::Itertools;
use levy_coupling::certificate::{certified_lambda1, lyapunov_sweep, RadialGrid};
use levy_coupling::coupling::{
    reflect, run_ensemble, simulate_coupled_path, simulate_single_path, uniform_grid, CouplingMode,
    DriftIntegrator, EnsembleSpec, SchemeConfig,
};
use levy_coupling::diagnostics::{
    empirical_cf, kolmogorov_pvalue, ks_statistic, paired_energy_test,
};
use levy_coupling::drift::{
    radial_power_drift, small_alpha_gate_margin, stable_potential_drift, DriftCondition,
    DriftField, PowerTerm,
};
use levy_coupling::psi::{build_psi, g_positivity_check, PsiSpec, RadialProfile, Regime};
use levy_coupling::quadrature::QuadConfig;
use levy_coupling::rng::stream;
use levy_coupling::stable_noise::{sample_increment, sample_jump_in_band, StableSpec};
use levy_coupling::wasserstein::{
    assignment_wp, coupling_wp_upper, exact_empirical_wp, sorted_wp, EmpiricalMeasure,
};
use levy_coupling_cli::{
    simulate, wp, DriftChoice, ExperimentConfig, SimulateOutcome, INTEGRATOR_SLACK, PATHS_FILE,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

// Pinned tolerances.
const ALGEBRA_TOL: f64 = 1e-12;
const MC_SIGMAS: f64 = 3.0;
const TEST_LEVEL: f64 = 0.01;
const GLUE_TOL: f64 = 1e-9;
const GATE_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-10;
const BRACKET_TOL: f64 = 1e-12;
const HIT_TOL: f64 = 1e-6;
const METRIC_TOL: f64 = 1e-9;
/// p = 1 admits several optimal matchings whose sums round differently.
const TIE_TOL: f64 = 1e-12;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

/// Collects named sub-checks into one outcome.
#[derive(Default)]
struct Checks {
    parts: Vec<(bool, String)>,
}

impl Checks {
    fn add(&mut self, ok: bool, what: impl Into<String>) {
        self.parts.push((ok, what.into()));
    }

    fn finish(self) -> Outcome {
        let passed = self.parts.iter().all(|p| p.0);
        let detail = self
            .parts
            .iter()
            .map(|(ok, what)| {
                if *ok {
                    what.clone()
                } else {
                    format!("FAILED {what}")
                }
            })
            .join("; ");
        Outcome::new(passed, detail)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian_vec<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn reflection_algebra() -> Outcome {
    let mut rng = stream(101, 0);
    let (mut worst_a1, mut worst_a2, mut worst_a3, mut worst_par) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut equal_branch = 0;
    for i in 0..100_000 {
        let d = rng.random_range(1..=5);
        let x = gaussian_vec(d, &mut rng);
        let y = if i % 100 == 0 {
            x.clone()
        } else {
            gaussian_vec(d, &mut rng)
        };
        let z: Vec<f64> = gaussian_vec(d, &mut rng).iter().map(|c| c * 3.0).collect();
        let phi = reflect(&x, &y, &z);
        let back = reflect(&x, &y, &phi);
        let zn = norm(&z);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        worst_a1 = worst_a1
            .max(norm(&back.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>()) / (1.0 + zn));
        worst_a2 = worst_a2.max((norm(&phi) - zn).abs() / zn.max(f64::MIN_POSITIVE));
        let r = norm(&diff);
        if r == 0.0 {
            equal_branch += 1;
            // φ = -z when x = y.
            worst_a3 = worst_a3
                .max(norm(&phi.iter().zip(&z).map(|(a, b)| a + b).collect::<Vec<_>>()) / zn);
            continue;
        }
        let e: Vec<f64> = diff.iter().map(|c| c / r).collect();
        let sum: Vec<f64> = z.iter().zip(&phi).map(|(a, b)| a + b).collect();
        worst_a3 = worst_a3.max(dot(&sum, &e).abs() / zn);
        let gap: Vec<f64> = z.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let along = dot(&gap, &e);
        let residual: Vec<f64> = gap.iter().zip(&e).map(|(g, c)| g - along * c).collect();
        worst_par = worst_par.max(norm(&residual) / zn);
    }
    let mut checks = Checks::default();
    checks.add(
        worst_a1 <= ALGEBRA_TOL,
        format!("A1 involution max {worst_a1:.1e}"),
    );
    checks.add(
        worst_a2 <= ALGEBRA_TOL,
        format!("A2 norm max {worst_a2:.1e}"),
    );
    checks.add(
        worst_a3 <= ALGEBRA_TOL,
        format!("A3 orthogonality max {worst_a3:.1e}"),
    );
    checks.add(
        worst_par <= ALGEBRA_TOL,
        format!("A3 parallel max {worst_par:.1e}"),
    );
    checks.add(
        equal_branch == 1000,
        format!("{equal_branch} x = y triples"),
    );
    checks.finish()
}

fn stable_sampler_law() -> Outcome {
    let mut checks = Checks::default();
    let norms = [0.3, 0.7, 1.0, 1.5, 2.5];
    for (k, &(d, alpha)) in [(1usize, 0.8), (1, 1.5), (2, 1.5), (3, 1.2)]
        .iter()
        .enumerate()
    {
        let spec = StableSpec::new(d, alpha).unwrap();
        let mut rng = stream(202, k as u64);
        let samples: Vec<Vec<f64>> = (0..100_000)
            .map(|_| sample_increment(&spec, 1.0, &mut rng).unwrap())
            .collect();
        let dir: Vec<f64> = (1..=d).map(|i| i as f64).collect();
        let dn = norm(&dir);
        let mut worst = 0.0f64;
        for &s in &norms {
            let xi: Vec<f64> = dir.iter().map(|c| c * s / dn).collect();
            let cf = empirical_cf(&samples, &xi);
            let target = (-s.powf(alpha)).exp();
            worst = worst
                .max((cf.re - target).abs() / cf.se_re)
                .max(cf.im.abs() / cf.se_im);
        }
        checks.add(
            worst <= MC_SIGMAS,
            format!("d={d} a={alpha} max {worst:.2} se"),
        );
    }
    let spec = StableSpec::new(1, 1.0).unwrap();
    let mut rng = stream(202, 9);
    let cauchy: Vec<f64> = (0..100_000)
        .map(|_| sample_increment(&spec, 1.0, &mut rng).unwrap()[0])
        .collect();
    let ks = ks_statistic(&cauchy, |x| 0.5 + x.atan() / PI);
    let p = kolmogorov_pvalue(cauchy.len(), ks);
    checks.add(p > TEST_LEVEL, format!("Cauchy KS p = {p:.3}"));
    checks.finish()
}

fn reflection_invariance() -> Outcome {
    let (alpha, outer) = (1.5, 1.0);
    let inner = 1e-3 * outer;
    let (x, y) = ([0.4, 0.3], [0.0, 0.0]);
    let mut rng = stream(303, 0);
    let z: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            let mut v = vec![0.0; 2];
            sample_jump_in_band(alpha, inner, outer, &mut rng, &mut v);
            v
        })
        .collect();
    let images: Vec<Vec<f64>> = z.iter().map(|v| reflect(&x, &y, v)).collect();
    let test = paired_energy_test(&z, &images, 199, 303);
    Outcome::new(
        test.p_value > TEST_LEVEL,
        format!(
            "paired energy p = {:.3} (10^4 jumps, d = 2, |z| <= {outer})",
            test.p_value
        ),
    )
}

// Random parameter sets that each regime's construction accepts.
fn parameter_sets(regime: Regime, count: usize, seed: u64) -> Vec<(StableSpec, DriftCondition)> {
    let mut rng = stream(seed, 0);
    let mut out = Vec::new();
    while out.len() < count {
        let d = rng.random_range(1..=3);
        let l0 = rng.random_range(0.5..1.5);
        let theta = if rng.random_bool(0.5) {
            2.0
        } else {
            rng.random_range(2.0..4.0)
        };
        let k2 = rng.random_range(0.2..2.0);
        match regime {
            Regime::HighAlpha => {
                let spec = StableSpec::new(d, rng.random_range(1.4..1.9)).unwrap();
                let cond = DriftCondition::new(rng.random_range(0.2..2.0), k2, l0, theta).unwrap();
                // Skip sets whose exponential constants leave double range.
                if let Ok(psi) = build_psi(&spec, &cond) {
                    if 2.0 * l0 * psi.c1.unwrap() < 600.0 {
                        out.push((spec, cond));
                    }
                }
            }
            Regime::LowAlpha => {
                let spec = StableSpec::new(d, rng.random_range(0.3..=1.0)).unwrap();
                let probe = DriftCondition::new(1e-300, k2, l0, theta).unwrap();
                let room = small_alpha_gate_margin(&spec, &probe) / l0.powf(spec.alpha());
                out.push((
                    spec,
                    DriftCondition::new(room * rng.random_range(0.1..0.9), k2, l0, theta).unwrap(),
                ));
            }
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// ψ'(2L0) from the concave branch formula alone.
fn closed_form_slope(psi: &PsiSpec) -> f64 {
    let b = 2.0 * psi.l0;
    match psi.regime {
        Regime::HighAlpha => {
            let c1 = psi.c1.unwrap();
            c1 * (-c1 * b).exp()
        }
        Regime::LowAlpha => 1.0 - psi.c.unwrap() * (1.0 + psi.alpha) * b.powf(psi.alpha),
    }
}

fn psi_construction() -> Outcome {
    let mut checks = Checks::default();
    for regime in [Regime::HighAlpha, Regime::LowAlpha] {
        let (mut glue, mut slope, mut bad_shape) = (0.0f64, 0.0f64, 0usize);
        for (spec, cond) in parameter_sets(regime, 20, 404) {
            let psi = build_psi(&spec, &cond).unwrap();
            let b = 2.0 * cond.l0;
            let (left, right) = (psi.inner_jet(b), psi.outer_jet(b));
            glue = glue
                .max(rel(left.value, right.value))
                .max(rel(left.first, right.first))
                .max(rel(left.second, right.second));
            let exact = closed_form_slope(&psi);
            slope = slope
                .max(rel(left.first, exact))
                .max(rel(right.first, exact));
            for i in 1..=2000 {
                let r = 10.0 * cond.l0 * i as f64 / 2000.0;
                let concave_ok = r >= b || psi.second_derivative(r) < 0.0;
                if !(psi.derivative(r) > 0.0) || !concave_ok {
                    bad_shape += 1;
                }
            }
        }
        checks.add(
            glue <= GLUE_TOL,
            format!("{regime:?} C2 gluing max rel {glue:.1e}"),
        );
        checks.add(
            slope <= GLUE_TOL,
            format!("{regime:?} psi'(2L0+-) vs closed form max rel {slope:.1e}"),
        );
        checks.add(
            bad_shape == 0,
            format!("{regime:?} shape violations {bad_shape}"),
        );
    }
    checks.finish()
}

fn lyapunov_certificate() -> Outcome {
    let mut checks = Checks::default();
    let quad = QuadConfig::with_abs_tol(QUAD_TOL);

    let spec = StableSpec::new(1, 1.5).unwrap();
    let cond = DriftCondition::new(1.0, 1.0, 1.0, 2.0).unwrap();
    let psi = build_psi(&spec, &cond).unwrap();
    let lambda1 = certified_lambda1(&psi, &spec, &cond).unwrap();
    let formula = psi.big_c.unwrap() * psi.c1.unwrap().powf(0.5) * (-2.0f64).exp() / 2.0;
    checks.add(
        rel(lambda1, formula) <= 1e-15,
        format!("lambda1 = {lambda1:.6e}"),
    );
    let sweep = lyapunov_sweep(&psi, &spec, &cond, &RadialGrid::standard(1.0), &quad).unwrap();
    checks.add(
        sweep.lambda_small >= lambda1,
        format!(
            "HighAlpha inf ratio on (0,L0] = {:.3e} vs lambda1",
            sweep.lambda_small
        ),
    );
    checks.add(
        sweep.lambda_star() > 0.0,
        format!("HighAlpha lambda* = {:.3e}", sweep.lambda_star()),
    );

    let spec = StableSpec::new(1, 1.0).unwrap();
    let cond = DriftCondition::new(0.05, 1.0, 1.0, 2.0).unwrap();
    let margin = small_alpha_gate_margin(&spec, &cond);
    let expected = 1.0 / (4.0 * PI) - 0.05;
    checks.add(
        (margin - expected).abs() <= GATE_TOL,
        format!("LowAlpha margin {margin:.15} vs {expected:.15}"),
    );
    let psi = build_psi(&spec, &cond).unwrap();
    let sweep = lyapunov_sweep(&psi, &spec, &cond, &RadialGrid::standard(1.0), &quad).unwrap();
    checks.add(
        sweep.lambda_star() > 0.0,
        format!("LowAlpha lambda* = {:.3e}", sweep.lambda_star()),
    );
    checks.finish()
}

fn g_positivity() -> Outcome {
    let mut checks = Checks::default();
    let target = 1.0 - 2.1f64.ln();
    let mut sets = vec![
        (
            StableSpec::new(1, 1.5).unwrap(),
            DriftCondition::new(1.0, 1.0, 1.0, 2.0).unwrap(),
        ),
        (
            StableSpec::new(1, 1.0).unwrap(),
            DriftCondition::new(0.05, 1.0, 1.0, 2.0).unwrap(),
        ),
    ];
    sets.extend(parameter_sets(Regime::HighAlpha, 10, 606));
    sets.extend(parameter_sets(Regime::LowAlpha, 10, 606));
    let (mut low_dev, mut high_min, mut failures) = (0.0f64, f64::INFINITY, 0usize);
    for (spec, cond) in sets {
        let psi = build_psi(&spec, &cond).unwrap();
        let grid: Vec<f64> = (0..=800)
            .map(|i| cond.l0 * (2.0 + 8.0 * i as f64 / 800.0))
            .collect();
        let report = g_positivity_check(&psi, &grid);
        if !report.passed() || !(report.g_r1 > 0.0) {
            failures += 1;
        }
        match psi.regime {
            Regime::LowAlpha => low_dev = low_dev.max((report.bracket - target).abs()),
            Regime::HighAlpha => {
                if psi.c2.unwrap() != 20.0 * psi.c1.unwrap() {
                    failures += 1;
                }
                high_min = high_min.min(report.bracket);
            }
        }
    }
    checks.add(
        low_dev <= BRACKET_TOL,
        format!("LowAlpha bracket dev {low_dev:.1e}"),
    );
    checks.add(
        high_min >= target,
        format!("HighAlpha min bracket {high_min:.6} >= {target:.6}"),
    );
    checks.add(
        failures == 0,
        format!("g(r1) or grid positivity failures {failures}"),
    );
    checks.finish()
}

fn example_field() -> (StableSpec, DriftField, PsiSpec) {
    let spec = StableSpec::new(1, 1.5).unwrap();
    let field = stable_potential_drift(1.5, 1).unwrap();
    let psi = build_psi(&spec, &field.claimed_condition.unwrap()).unwrap();
    (spec, field, psi)
}

fn marginal_fidelity() -> Outcome {
    let (spec, field, psi) = example_field();
    let cfg = SchemeConfig::for_l0(1.0);
    let grid = [0.0, 1.0];
    let job = EnsembleSpec {
        x0: &[0.5],
        y0: &[0.0],
        field: &field,
        spec: &spec,
        psi: &psi,
        cfg: &cfg,
        horizon: 1.0,
        record_grid: &grid,
    };
    let coupled: Vec<Vec<f64>> = run_ensemble(&job, 10_000, 707)
        .unwrap()
        .into_iter()
        .map(|p| p.records[1].x.clone())
        .collect();
    let single: Vec<Vec<f64>> = (0..10_000u64)
        .map(|i| {
            let mut rng = stream(708, i);
            simulate_single_path(&[0.5], &field, &spec, &psi, &cfg, 1.0, &grid, &mut rng).unwrap()
                [1]
            .1
            .clone()
        })
        .collect();
    let mut worst = 0.0f64;
    for xi in [0.5, 1.0, 2.0, 3.0, 5.0] {
        let (a, b) = (empirical_cf(&coupled, &[xi]), empirical_cf(&single, &[xi]));
        let re = (a.re - b.re).abs() / a.se_re.hypot(b.se_re);
        let im = (a.im - b.im).abs() / a.se_im.hypot(b.se_im);
        worst = worst.max(re).max(im);
    }
    Outcome::new(
        worst <= MC_SIGMAS,
        format!("max CF gap {worst:.2} combined se at 5 frequencies"),
    )
}

fn synchronous_phase() -> Outcome {
    // b(x) = -2|x|x: the potential example rescaled so that K2 = 1 holds with
    // equality at x = -y, where the pair obeys dr/dt = -r².
    let mut checks = Checks::default();
    let spec = StableSpec::new(1, 1.5).unwrap();
    let cond = DriftCondition::new(1.0, 1.0, 1.0, 3.0).unwrap();
    let field = radial_power_drift(
        vec![PowerTerm {
            coef: 2.0,
            power: 1.0,
        }],
        1,
        "rescaled potential",
    )
    .unwrap()
    .with_condition(cond);
    let psi = build_psi(&spec, &cond).unwrap();

    let mut x = vec![1.0];
    let mut y = vec![-1.0];
    let mut integ = DriftIntegrator::new(1);
    integ.advance(&field, &mut x, 0.0, 0.5).unwrap();
    let mut integ = DriftIntegrator::new(1);
    integ.advance(&field, &mut y, 0.0, 0.5).unwrap();
    let r_half = x[0] - y[0];
    checks.add(
        (r_half - 1.0).abs() <= HIT_TOL,
        format!("noise-free r(0.5) = {r_half:.12}"),
    );

    let t0 = cond.l0.powf(2.0 - cond.theta) / (cond.k2 * (cond.theta - 2.0));
    let cfg = SchemeConfig::for_l0(1.0);
    let grid = uniform_grid(0.6, 1e-3).unwrap();
    let (mut worst_hit, mut riccati_excess, mut backsteps, mut jumps) =
        (0.0f64, f64::NEG_INFINITY, 0usize, 0u64);
    for seed in 0..32u64 {
        let run = |s: u64| {
            simulate_coupled_path(
                &[1.0],
                &[-1.0],
                &field,
                &spec,
                &psi,
                &cfg,
                0.6,
                &grid,
                &mut stream(808, s),
            )
            .unwrap()
        };
        let path = run(seed);
        if path != run(seed) {
            backsteps += 1_000_000;
        }
        jumps += path.jumps;
        let hit = path.hit_l0_time.unwrap_or(f64::INFINITY);
        worst_hit = worst_hit.max(hit);
        let mut prev = 2.0f64;
        for s in path.records.iter().take_while(|s| s.t < hit) {
            let r = s.distance();
            riccati_excess = riccati_excess.max(r - 2.0 / (1.0 + 2.0 * s.t));
            if r > prev {
                backsteps += 1;
            }
            prev = r;
        }
    }
    // Thousands of shared jumps hit the pair, yet r never moves up.
    checks.add(
        backsteps == 0 && jumps > 0,
        format!("reproducible, nonincreasing difference before L0 across {jumps} jumps"),
    );
    checks.add(
        riccati_excess <= HIT_TOL,
        format!("r_t - 2/(1+2t) max {riccati_excess:.1e}"),
    );
    checks.add(
        worst_hit <= 0.5 + HIT_TOL && worst_hit < t0,
        format!("latest hit {worst_hit:.4} (t0 = {t0})"),
    );
    checks.finish()
}

struct ExampleRun {
    _dir: tempfile::TempDir,
    cfg: ExperimentConfig,
    out: SimulateOutcome,
}

fn example_config(dir: PathBuf, halved: bool) -> ExperimentConfig {
    let defaults = SchemeConfig::for_l0(1.0);
    let factor = if halved { 0.5 } else { 1.0 };
    ExperimentConfig {
        paths: 10_000,
        horizon: 5.0,
        record_step: 0.25,
        seed: 909,
        out: dir,
        eps_delta: Some(defaults.eps_delta * factor),
        eps_couple: Some(defaults.eps_couple * factor),
        ..ExperimentConfig::default()
    }
}

fn example_run() -> &'static ExampleRun {
    static RUN: OnceLock<ExampleRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = example_config(dir.path().to_path_buf(), false);
        let out = simulate(&cfg).unwrap();
        ExampleRun {
            _dir: dir,
            cfg,
            out,
        }
    })
}

// Returns (passed, description) for the decay domination and rate fit checks.
fn headline_verdict(out: &SimulateOutcome) -> (bool, String) {
    let fit = out.fit.expect("decay series has a positive prefix");
    let lambda = out.cert.lambda;
    let ok = out.flags == 0 && fit.lambda_hat >= lambda - 2.0 * fit.std_err;
    (
        ok,
        format!(
            "{} flagged points, lambda_hat = {:.4} +- {:.4} vs lambda_cert = {lambda:.3e}",
            out.flags, fit.lambda_hat, fit.std_err
        ),
    )
}

fn contraction_headline() -> Outcome {
    let base = example_run();
    let (ok, text) = headline_verdict(&base.out);
    let dir = tempfile::tempdir().unwrap();
    let halved = simulate(&example_config(dir.path().to_path_buf(), true)).unwrap();
    let (ok_halved, text_halved) = headline_verdict(&halved);
    let mut checks = Checks::default();
    checks.add(ok, text);
    checks.add(ok == ok_halved, format!("halved eps: {}", text_halved));
    checks.finish()
}

fn dissipative_scenario() -> Outcome {
    let mut checks = Checks::default();
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        d: 2,
        drift: DriftChoice::Linear,
        kappa: 1.0,
        coupling: CouplingMode::Synchronous,
        x0: Some(vec![1.0, 0.5]),
        y0: Some(vec![-1.0, 0.0]),
        paths: 1000,
        horizon: 3.0,
        record_step: 0.25,
        seed: 1010,
        out: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    simulate(&base).unwrap();
    let r0 = 2.0f64.hypot(0.5);
    for p in [1.0, 2.0] {
        let cfg = ExperimentConfig { p, ..base.clone() };
        let out = wp(&cfg, &dir.path().join(PATHS_FILE), None).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for row in &out.rows {
            let limit = (-row.t).exp() * r0;
            let rel_se = if row.upper > 0.0 {
                row.upper_se / row.upper
            } else {
                0.0
            };
            worst = worst.max(row.upper / (limit * (1.0 + MC_SIGMAS * rel_se)) - 1.0);
        }
        checks.add(
            worst <= INTEGRATOR_SLACK && out.flags == 0,
            format!("p = {p}: max relative excess {worst:.1e}"),
        );
    }
    checks.finish()
}

fn brute_force_wp(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> f64 {
    let n = mu.n();
    let best = (0..n)
        .permutations(n)
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(i, &j)| norm(&sub(&mu.points()[i], &nu.points()[j])).powf(p))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    (best / n as f64).powf(1.0 / p)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn random_measure<R: Rng>(n: usize, d: usize, rng: &mut R) -> EmpiricalMeasure {
    EmpiricalMeasure::new((0..n).map(|_| gaussian_vec(d, rng)).collect()).unwrap()
}

fn ot_solver() -> Outcome {
    let mut checks = Checks::default();
    let mut rng = stream(1111, 0);
    let (mut mismatches, mut tie_dev) = (0usize, 0.0f64);
    for k in 0..100 {
        let (mu, nu) = (
            random_measure(64, 1, &mut rng),
            random_measure(64, 1, &mut rng),
        );
        let p = [1.0, 1.5, 2.0, 3.0][k % 4];
        let (a, s) = (
            assignment_wp(&mu, &nu, p).unwrap(),
            sorted_wp(&mu, &nu, p).unwrap(),
        );
        if p == 1.0 {
            tie_dev = tie_dev.max(rel(a, s));
        } else if a != s {
            mismatches += 1;
        }
    }
    checks.add(
        mismatches == 0 && tie_dev <= TIE_TOL,
        format!("sort vs assignment: {mismatches} inexact, p=1 dev {tie_dev:.1e}"),
    );

    let mut brute_dev = 0.0f64;
    let mut instances = 0;
    for n in 1..=7 {
        for k in 0..12 {
            let d = 1 + k % 3;
            let p = [1.0, 2.0, 3.0][k % 3];
            let (mu, nu) = (
                random_measure(n, d, &mut rng),
                random_measure(n, d, &mut rng),
            );
            brute_dev = brute_dev.max(rel(
                assignment_wp(&mu, &nu, p).unwrap(),
                brute_force_wp(&mu, &nu, p),
            ));
            instances += 1;
        }
    }
    checks.add(
        brute_dev <= 1e-12,
        format!("brute force on {instances} instances n <= 7, max rel {brute_dev:.1e}"),
    );

    let (mut asym, mut triangle, mut identity, mut upper_below) =
        (0.0f64, f64::NEG_INFINITY, 0.0f64, 0usize);
    for k in 0..100 {
        let p = [1.0, 2.0][k % 2];
        let (a, b, c) = (
            random_measure(32, 2, &mut rng),
            random_measure(32, 2, &mut rng),
            random_measure(32, 2, &mut rng),
        );
        let ab = exact_empirical_wp(&a, &b, p).unwrap();
        asym = asym.max((ab - exact_empirical_wp(&b, &a, p).unwrap()).abs());
        let (bc, ac) = (
            exact_empirical_wp(&b, &c, p).unwrap(),
            exact_empirical_wp(&a, &c, p).unwrap(),
        );
        triangle = triangle.max(ac - ab - bc);
        let mut shuffled = a.points().to_vec();
        shuffled.reverse();
        identity = identity
            .max(exact_empirical_wp(&a, &EmpiricalMeasure::new(shuffled).unwrap(), p).unwrap());
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = a
            .points()
            .iter()
            .cloned()
            .zip(b.points().iter().cloned())
            .collect();
        if coupling_wp_upper(&pairs, p).unwrap().0 < ab {
            upper_below += 1;
        }
    }
    checks.add(asym <= METRIC_TOL, format!("symmetry {asym:.1e}"));
    checks.add(
        triangle <= METRIC_TOL,
        format!("triangle excess {triangle:.1e}"),
    );
    checks.add(
        identity <= METRIC_TOL,
        format!("permuted copy {identity:.1e}"),
    );
    checks.add(
        upper_below == 0,
        format!("coupling bound below exact in {upper_below} trials"),
    );
    checks.finish()
}

fn end_to_end() -> Outcome {
    let run = example_run();
    let input = run.cfg.out.join(PATHS_FILE);
    let out = wp(&run.cfg, &input, None).unwrap();
    let worst = out
        .rows
        .iter()
        .map(|r| (r.exact - r.bound) / r.exact_se.max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(
        out.flags == 0 && out.exact_paths == 512,
        format!(
            "{} flags over {} grid times at n = {}, max (exact - bound)/se = {worst:.3e}",
            out.flags,
            out.rows.len(),
            out.exact_paths
        ),
    )
}

type Runner = fn() -> Outcome;

const CRITERIA: [(u32, &str, Runner, Option<f64>); 12] = [
    (1, "reflection map algebra", reflection_algebra, Some(1.0)),
    (2, "stable sampler law", stable_sampler_law, Some(30.0)),
    (
        3,
        "reflection invariance of the restricted measure",
        reflection_invariance,
        Some(10.0),
    ),
    (4, "psi construction", psi_construction, Some(5.0)),
    (5, "Lyapunov certificate", lyapunov_certificate, Some(60.0)),
    (6, "g positivity", g_positivity, None),
    (
        7,
        "marginal fidelity of the coupling",
        marginal_fidelity,
        Some(300.0),
    ),
    (8, "synchronous phase", synchronous_phase, None),
    (9, "contraction headline", contraction_headline, Some(600.0)),
    (
        10,
        "uniformly dissipative scenario",
        dissipative_scenario,
        None,
    ),
    (11, "OT solver correctness", ot_solver, None),
    (12, "end-to-end W_p bound", end_to_end, None),
];

fn main() {
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for (id, name, run, budget) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let mut outcome = run();
        let secs = start.elapsed().as_secs_f64();
        if let Some(limit) = budget {
            if secs > limit {
                outcome.passed = false;
                outcome
                    .detail
                    .push_str(&format!("; FAILED runtime budget {limit}s"));
            }
        }
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict}: {name} [{:.1}s] {}",
            secs, outcome.detail
        );
        if !outcome.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
