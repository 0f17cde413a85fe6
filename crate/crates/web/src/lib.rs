//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Each export has a plain Rust twin returning `Result<Curve, String>` so the
//! logic is testable natively; the exports only convert errors for JS.

use levy_coupling::certificate::{lyapunov_sweep, RadialGrid};
use levy_coupling::coupling::{
    psi_decay_estimate, run_ensemble, uniform_grid, EnsembleSpec, SchemeConfig,
};
use levy_coupling::drift::{check_small_alpha_gate, stable_potential_drift, DriftCondition};
use levy_coupling::error::Error;
use levy_coupling::psi::{build_psi, psi_eval, Regime};
use levy_coupling::quadrature::QuadConfig;
use levy_coupling::stable_noise::StableSpec;
use wasm_bindgen::prelude::*;

/// Sampled curve `y(x)` with a short caption.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
    caption: String,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn caption(&self) -> String {
        self.caption.clone()
    }
}

impl Curve {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }
}

/// Radial drift condition `(K1, K2, L0, θ)` as entered on the page.
#[derive(Debug, Clone, Copy)]
pub struct Condition {
    pub k1: f64,
    pub k2: f64,
    pub l0: f64,
    pub theta: f64,
}

fn model(d: usize, alpha: f64, c: Condition) -> Result<(StableSpec, DriftCondition), String> {
    let spec = StableSpec::new(d, alpha).map_err(|e| e.to_string())?;
    let cond = DriftCondition::new(c.k1, c.k2, c.l0, c.theta).map_err(|e| e.to_string())?;
    let gate = check_small_alpha_gate(&spec, &cond);
    if !gate.passed {
        return Err(Error::GateFailure {
            margin: gate.margin,
        }
        .to_string());
    }
    Ok((spec, cond))
}

/// `ψ` on `[0, 3 L0]`.
pub fn psi_curve_impl(d: usize, alpha: f64, c: Condition, n: usize) -> Result<Curve, String> {
    let (spec, cond) = model(d, alpha, c)?;
    let l0 = c.l0;
    let psi = build_psi(&spec, &cond).map_err(|e| e.to_string())?;
    let n = n.clamp(2, 4000);
    let x: Vec<f64> = (0..n)
        .map(|i| 3.0 * l0 * i as f64 / (n - 1) as f64)
        .collect();
    let y = x
        .iter()
        .map(|&r| psi_eval(&psi, r))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let regime = match psi.regime {
        Regime::HighAlpha => format!("1 - exp(-c1 r), c1 = {:.4}", psi.c1.unwrap_or(f64::NAN)),
        Regime::LowAlpha => format!("r - c r^(1+a), c = {:.4}", psi.c.unwrap_or(f64::NAN)),
    };
    Ok(Curve {
        x,
        y,
        caption: format!(
            "psi: {regime}; exponential piece beyond 2 L0 = {}",
            2.0 * l0
        ),
    })
}

/// `-L̃ψ/ψ` on a geometric grid over `(1e-3 L0, 10 L0]`.
pub fn lyapunov_curve_impl(d: usize, alpha: f64, c: Condition, n: usize) -> Result<Curve, String> {
    let (spec, cond) = model(d, alpha, c)?;
    let l0 = c.l0;
    let psi = build_psi(&spec, &cond).map_err(|e| e.to_string())?;
    let grid = RadialGrid::geometric(l0, n.clamp(2, 400), 1e-3, 10.0).map_err(|e| e.to_string())?;
    let sweep = lyapunov_sweep(&psi, &spec, &cond, &grid, &QuadConfig::default())
        .map_err(|e| e.to_string())?;
    Ok(Curve {
        x: sweep.points.iter().map(|p| p.r).collect(),
        y: sweep.points.iter().map(|p| p.ratio).collect(),
        caption: format!(
            "inf ratio: {:.3e} on (0, L0], {:.3e} beyond",
            sweep.lambda_small, sweep.lambda_large
        ),
    })
}

/// Mean `ψ(|X_t - Y_t|)` over a small coupled ensemble in the potential example.
pub fn decay_curve_impl(
    alpha: f64,
    beta: f64,
    r0: f64,
    paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<Curve, String> {
    let spec = StableSpec::new(1, alpha).map_err(|e| e.to_string())?;
    let field = stable_potential_drift(beta, 1).map_err(|e| e.to_string())?;
    let cond = field
        .claimed_condition
        .ok_or("drift carries no condition")?;
    let psi = build_psi(&spec, &cond).map_err(|e| e.to_string())?;
    let cfg = SchemeConfig::for_l0(cond.l0);
    let grid = uniform_grid(horizon, horizon / 20.0).map_err(|e| e.to_string())?;
    let (x0, y0) = ([0.5 * r0], [-0.5 * r0]);
    let job = EnsembleSpec {
        x0: &x0,
        y0: &y0,
        field: &field,
        spec: &spec,
        psi: &psi,
        cfg: &cfg,
        horizon,
        record_grid: &grid,
    };
    let ensemble = run_ensemble(&job, paths.clamp(1, 5000), seed).map_err(|e| e.to_string())?;
    let decay = psi_decay_estimate(&ensemble, &psi).map_err(|e| e.to_string())?;
    let merged = ensemble.iter().filter(|p| p.merge_time.is_some()).count();
    Ok(Curve {
        x: decay.iter().map(|p| p.t).collect(),
        y: decay.iter().map(|p| p.mean).collect(),
        caption: format!(
            "{merged} of {} pairs merged by t = {horizon}",
            ensemble.len()
        ),
    })
}

#[wasm_bindgen]
pub fn psi_curve(
    d: usize,
    alpha: f64,
    k1: f64,
    k2: f64,
    l0: f64,
    theta: f64,
    n: usize,
) -> Result<Curve, JsError> {
    psi_curve_impl(d, alpha, Condition { k1, k2, l0, theta }, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lyapunov_curve(
    d: usize,
    alpha: f64,
    k1: f64,
    k2: f64,
    l0: f64,
    theta: f64,
    n: usize,
) -> Result<Curve, JsError> {
    lyapunov_curve_impl(d, alpha, Condition { k1, k2, l0, theta }, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn decay_curve(
    alpha: f64,
    beta: f64,
    r0: f64,
    paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<Curve, JsError> {
    decay_curve_impl(alpha, beta, r0, paths, horizon, seed).map_err(|e| JsError::new(&e))
}
