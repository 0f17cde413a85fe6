//! Event-driven simulation of the reflection coupling.
//!
//! Stable jumps above a truncation radius `δ` arrive from a compound Poisson
//! clock; jumps below `δ` are replaced by a Gaussian kick of matched variance
//! that both components share. While `|x - y| <= L0`, a large jump `z` with
//! `|z| <= a|x - y|` is applied as `z` to one component and as its mirror image
//! `φ_{x,y}(z)` to the other; every other jump is synchronous. The drift is
//! integrated between events with step-doubled RK4. Once `|x - y|` drops below
//! `eps_couple` the pair is merged and moves as one path.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::drift::{DriftCondition, DriftField};
use crate::error::{domain, Error, Result};
use crate::psi::{PsiSpec, RadialProfile};
use crate::rng::stream;
use crate::stable_noise::{decompose, StableSpec};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Mirror image `φ_{x,y}(z) = z - 2 <x-y, z> (x-y) / |x-y|²`, and `-z` when `x = y`.
pub fn reflect(x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    reflect_into(x, y, z, &mut out);
    out
}

pub fn reflect_into(x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
    let norm2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    if norm2 == 0.0 {
        out.iter_mut().zip(z).for_each(|(o, zi)| *o = -zi);
        return;
    }
    let proj: f64 = x
        .iter()
        .zip(y)
        .zip(z)
        .map(|((p, q), zi)| (p - q) * zi)
        .sum::<f64>()
        / norm2;
    for (((o, zi), p), q) in out.iter_mut().zip(z).zip(x).zip(y) {
        *o = zi - 2.0 * proj * (p - q);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpChannel {
    /// Jumps of the isotropic stable part.
    Stable,
    /// Finite-activity jumps outside the stable part; always synchronous.
    Excess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// Reflection for small jumps at distance `<= L0`, synchronous otherwise.
    Mixed,
    /// Every jump and kick is shared.
    Synchronous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub merged: bool,
    /// `|x - y|`, kept from the simulator's difference coordinates.
    pub r: f64,
}

impl CoupledState {
    pub fn new(t: f64, x: Vec<f64>, y: Vec<f64>, merged: bool) -> Self {
        let r = if merged { 0.0 } else { distance(&x, &y) };
        Self { t, x, y, merged, r }
    }

    pub fn distance(&self) -> f64 {
        self.r
    }
}

/// Increments `(dx, dy)` for a jump `z` at the current state.
pub fn coupled_jump<R: Rng + ?Sized>(
    state: &CoupledState,
    z: &[f64],
    channel: JumpChannel,
    a: f64,
    l0: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let r = state.distance();
    let norm = dot(z, z).sqrt();
    if channel == JumpChannel::Excess || state.merged || r > l0 || norm > a * r {
        return (z.to_vec(), z.to_vec());
    }
    let mirrored = reflect(&state.x, &state.y, z);
    if rng.random_bool(0.5) {
        (z.to_vec(), mirrored)
    } else {
        (mirrored, z.to_vec())
    }
}

/// Finite-activity jumps `N(0, scale² I)` at the given rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessJumps {
    pub rate: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub dt_max: f64,
    pub eps_delta: f64,
    pub eps_couple: f64,
    pub delta_floor: f64,
    pub compensate_small: bool,
    pub mode: CouplingMode,
    pub excess: Option<ExcessJumps>,
    /// Cap on jumps plus integration steps per path.
    pub max_events: u64,
}

impl SchemeConfig {
    /// Defaults scaled to the drift radius `L0`.
    pub fn for_l0(l0: f64) -> Self {
        Self {
            dt_max: 1e-2,
            eps_delta: 0.01,
            eps_couple: 1e-6 * l0,
            delta_floor: 1e-3 * l0,
            compensate_small: false,
            mode: CouplingMode::Mixed,
            excess: None,
            max_events: 100_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0) {
            return domain(format!("dt_max must be positive, got {}", self.dt_max));
        }
        if !(self.eps_delta > 0.0 && self.eps_delta < 1.0) {
            return domain(format!(
                "eps_delta must lie in (0, 1), got {}",
                self.eps_delta
            ));
        }
        if !(self.eps_couple > 0.0) {
            return domain(format!(
                "eps_couple must be positive, got {}",
                self.eps_couple
            ));
        }
        if !(self.delta_floor > 0.0) {
            return domain(format!(
                "delta_floor must be positive, got {}",
                self.delta_floor
            ));
        }
        if let Some(ex) = self.excess {
            if !(ex.rate >= 0.0 && ex.scale > 0.0) {
                return domain("excess jumps need rate >= 0 and scale > 0");
            }
        }
        Ok(())
    }
}

/// Step-doubled RK4 for `dx = b(x) dt`.
///
/// A pair is carried as `(x, x - y)` so that shared jumps leave the difference
/// untouched in floating point; the difference then obeys `b(x) - b(x - Δ)`.
#[derive(Debug, Clone)]
pub struct DriftIntegrator {
    dim: usize,
    pair: bool,
    hint: f64,
    // Error model from the last checked step: err ≈ rate h^5 near `anchor`.
    rate: f64,
    checked_h: f64,
    anchor: Vec<f64>,
    start_slope: Vec<f64>,
    mid_slope: Vec<f64>,
    stages: [Vec<f64>; 3],
    tmp: Vec<f64>,
    full: Vec<f64>,
    mid: Vec<f64>,
    half: Vec<f64>,
    other: Vec<f64>,
}

const RK_TOL: f64 = 1e-10;

struct Rhs<'a> {
    dim: usize,
    pair: bool,
    field: &'a DriftField,
}

impl Rhs<'_> {
    fn eval(&self, x: &[f64], out: &mut [f64], other: &mut [f64]) {
        let d = self.dim;
        self.field.evaluate_into(&x[..d], &mut out[..d]);
        if self.pair {
            for i in 0..d {
                other[i] = x[i] - x[d + i];
            }
            let (bx, by) = out.split_at_mut(d);
            self.field.evaluate_into(&other[..d], by);
            for i in 0..d {
                by[i] = bx[i] - by[i];
            }
        }
    }
}

// Classical RK4 step of size h from x, given the slope k0 at x.
#[allow(clippy::too_many_arguments)]
fn rk4_step(
    rhs: &Rhs<'_>,
    x: &[f64],
    k0: &[f64],
    h: f64,
    stages: &mut [Vec<f64>; 3],
    tmp: &mut [f64],
    other: &mut [f64],
    out: &mut [f64],
) {
    let [k1, k2, k3] = stages;
    for i in 0..x.len() {
        tmp[i] = x[i] + 0.5 * h * k0[i];
    }
    rhs.eval(tmp, k1, other);
    for i in 0..x.len() {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    rhs.eval(tmp, k2, other);
    for i in 0..x.len() {
        tmp[i] = x[i] + h * k2[i];
    }
    rhs.eval(tmp, k3, other);
    for i in 0..x.len() {
        out[i] = x[i] + h / 6.0 * (k0[i] + 2.0 * k1[i] + 2.0 * k2[i] + k3[i]);
    }
}

impl DriftIntegrator {
    // The h^5 model is trusted only for steps no longer than 4x the checked
    // one, from states within 1% of where it was checked, and with a 100x margin.
    fn predicts_small(&self, x: &[f64], h: f64) -> bool {
        if !(h <= 4.0 * self.checked_h) {
            return false;
        }
        let size = self.anchor.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let moved = x
            .iter()
            .zip(&self.anchor)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        moved <= 0.01 * (1.0 + size) && self.rate * h.powi(5) <= 0.01 * RK_TOL * (1.0 + size)
    }

    /// Integrator for a single `d`-vector.
    pub fn new(dim: usize) -> Self {
        Self::with_layout(dim, false)
    }

    /// Integrator for a pair stored as `(x, x - y)`.
    pub fn for_pair(dim: usize) -> Self {
        Self::with_layout(dim, true)
    }

    fn with_layout(dim: usize, pair: bool) -> Self {
        let n = if pair { 2 * dim } else { dim };
        Self {
            dim,
            pair,
            hint: 1e-2,
            rate: f64::INFINITY,
            checked_h: 0.0,
            anchor: vec![0.0; n],
            start_slope: vec![0.0; n],
            mid_slope: vec![0.0; n],
            stages: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
            full: vec![0.0; n],
            mid: vec![0.0; n],
            half: vec![0.0; n],
            other: vec![0.0; dim],
        }
    }

    /// Advances the state by `dt`, returning the number of accepted steps.
    pub fn advance(&mut self, field: &DriftField, x: &mut [f64], t: f64, dt: f64) -> Result<u64> {
        let n = if self.pair { 2 * self.dim } else { self.dim };
        if x.len() != n {
            return Err(Error::SizeMismatch {
                left: x.len(),
                right: n,
            });
        }
        let rhs = Rhs {
            dim: self.dim,
            pair: self.pair,
            field,
        };
        if dt <= 1e-13 * (1.0 + t) {
            // Rounding-level interval: one Euler step is exact to working precision.
            rhs.eval(x, &mut self.start_slope, &mut self.other);
            x.iter_mut()
                .zip(&self.start_slope)
                .for_each(|(v, b)| *v += dt * b);
            return Ok(1);
        }
        let mut done = 0.0;
        let mut steps = 0;
        while done < dt {
            let remaining = dt - done;
            let h = self.hint.min(remaining);
            if h < 1e-15 * (1.0 + t + done) {
                return Err(Error::StepUnderflow {
                    t: t + done,
                    step: h,
                });
            }
            rhs.eval(x, &mut self.start_slope, &mut self.other);
            if self.predicts_small(x, h) {
                // Short step next to a checked one: its error is far below tolerance.
                rk4_step(
                    &rhs,
                    x,
                    &self.start_slope,
                    h,
                    &mut self.stages,
                    &mut self.tmp,
                    &mut self.other,
                    &mut self.full,
                );
                x.copy_from_slice(&self.full);
                done = if h == remaining { dt } else { done + h };
                steps += 1;
                continue;
            }
            rk4_step(
                &rhs,
                x,
                &self.start_slope,
                h,
                &mut self.stages,
                &mut self.tmp,
                &mut self.other,
                &mut self.full,
            );
            rk4_step(
                &rhs,
                x,
                &self.start_slope,
                0.5 * h,
                &mut self.stages,
                &mut self.tmp,
                &mut self.other,
                &mut self.mid,
            );
            rhs.eval(&self.mid, &mut self.mid_slope, &mut self.other);
            rk4_step(
                &rhs,
                &self.mid,
                &self.mid_slope,
                0.5 * h,
                &mut self.stages,
                &mut self.tmp,
                &mut self.other,
                &mut self.half,
            );
            let err = self
                .full
                .iter()
                .zip(&self.half)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
                / 15.0;
            if !err.is_finite() || self.half.iter().any(|v| !v.is_finite()) {
                if h <= 1e-12 * (1.0 + t + done) {
                    return Err(Error::NonFinite { t: t + done });
                }
                self.hint = 0.1 * h;
                continue;
            }
            let scale = self.half.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let tol = RK_TOL * (1.0 + scale);
            let factor = if err == 0.0 {
                4.0
            } else {
                (0.9 * (tol / err).powf(0.2)).clamp(0.1, 4.0)
            };
            if err <= tol {
                // Rounding noise keeps the rate from claiming more than it measured.
                self.rate = err.max(1e-16 * (1.0 + scale)) / h.powi(5);
                self.checked_h = h;
                self.anchor.copy_from_slice(x);
                // Local Richardson extrapolation of the two half steps.
                for ((v, f), hf) in x.iter_mut().zip(&self.full).zip(&self.half) {
                    *v = hf + (hf - f) / 15.0;
                }
                done = if h == remaining { dt } else { done + h };
                steps += 1;
                // A step cut short by the interval end says nothing about growth.
                if h == self.hint || factor < 1.0 {
                    self.hint = h * factor;
                }
            } else {
                self.hint = h * factor;
            }
        }
        Ok(steps)
    }
}

/// Integrates `dx = b(x) dt` over `dt` with error control `1e-10 (1 + |x|)`.
pub fn step_drift(x: &[f64], field: &DriftField, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return domain(format!("dt must be positive, got {dt}"));
    }
    let mut out = x.to_vec();
    DriftIntegrator::new(x.len()).advance(field, &mut out, 0.0, dt)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub records: Vec<CoupledState>,
    /// First time with `|x - y| <= L0`.
    pub hit_l0_time: Option<f64>,
    pub merge_time: Option<f64>,
    pub jumps: u64,
    pub steps: u64,
}

/// Sorted recording times in `[0, horizon]` with spacing `step`.
pub fn uniform_grid(horizon: f64, step: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && step > 0.0) {
        return domain(format!(
            "need positive horizon and step, got {horizon}, {step}"
        ));
    }
    let n = (horizon / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(horizon)).collect();
    if horizon - grid[n] > 1e-9 * step {
        grid.push(horizon);
    } else {
        grid[n] = horizon;
    }
    Ok(grid)
}

// Pair state `x` and `Δ = x - y`, plus sampling scratch.
struct Pair {
    d: usize,
    state: Vec<f64>,
    merged: bool,
    z: Vec<f64>,
    kick: Vec<f64>,
    band: Vec<f64>,
}

impl Pair {
    fn x(&self) -> &[f64] {
        &self.state[..self.d]
    }

    fn gap(&self) -> &[f64] {
        &self.state[self.d..]
    }

    fn r(&self) -> f64 {
        if self.merged {
            0.0
        } else {
            dot(self.gap(), self.gap()).sqrt()
        }
    }

    fn snapshot(&self, t: f64) -> CoupledState {
        let x = self.x().to_vec();
        let y = x.iter().zip(self.gap()).map(|(a, g)| a - g).collect();
        CoupledState {
            t,
            x,
            y,
            merged: self.merged,
            r: self.r(),
        }
    }

    fn merge(&mut self) {
        self.merged = true;
        self.state[self.d..].iter_mut().for_each(|g| *g = 0.0);
    }

    // Applies the jump in `z`: x moves by the first increment, y by the second.
    fn apply<R: Rng + ?Sized>(&mut self, reflect_it: bool, rng: &mut R) {
        let d = self.d;
        if !reflect_it {
            for i in 0..d {
                self.state[i] += self.z[i];
            }
            return;
        }
        // φ(z) = z - 2 <e, z> e, so the gap moves by ±2 <e, z> e.
        let r = self.r();
        let along = dot(self.gap(), &self.z) / r;
        let to_x_is_z = rng.random_bool(0.5);
        for i in 0..d {
            let e = self.state[d + i] / r;
            let mirrored = self.z[i] - 2.0 * along * e;
            let (dx, dy) = if to_x_is_z {
                (self.z[i], mirrored)
            } else {
                (mirrored, self.z[i])
            };
            self.state[i] += dx;
            self.state[d + i] += dx - dy;
        }
    }
}

/// Simulates one coupled path and records it on `record_grid`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_coupled_path<R: Rng + ?Sized>(
    x0: &[f64],
    y0: &[f64],
    field: &DriftField,
    spec: &StableSpec,
    psi: &PsiSpec,
    cfg: &SchemeConfig,
    horizon: f64,
    record_grid: &[f64],
    rng: &mut R,
) -> Result<CoupledPath> {
    cfg.validate()?;
    let d = spec.d();
    if x0.len() != d || y0.len() != d {
        return Err(Error::SizeMismatch {
            left: x0.len().max(y0.len()),
            right: d,
        });
    }
    if field.dim != d {
        return Err(Error::SizeMismatch {
            left: field.dim,
            right: d,
        });
    }
    if !(horizon > 0.0) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    if record_grid.iter().any(|&t| !(0.0..=horizon).contains(&t))
        || record_grid.windows(2).any(|w| w[0] > w[1])
    {
        return domain("record grid must be sorted inside [0, horizon]");
    }
    let l0 = psi.l0;
    let a = psi.a;
    let mut pair = Pair {
        d,
        state: vec![0.0; 2 * d],
        merged: false,
        z: vec![0.0; d],
        kick: vec![0.0; d],
        band: vec![0.0; d],
    };
    for i in 0..d {
        pair.state[i] = x0[i];
        pair.state[d + i] = x0[i] - y0[i];
    }
    let mut path = CoupledPath {
        records: Vec::with_capacity(record_grid.len()),
        hit_l0_time: None,
        merge_time: None,
        jumps: 0,
        steps: 0,
    };
    if pair.r() <= cfg.eps_couple {
        pair.merge();
        path.merge_time = Some(0.0);
    }
    if pair.r() <= l0 {
        path.hit_l0_time = Some(0.0);
    }
    let mut pair_integrator = DriftIntegrator::for_pair(d);
    let mut single_integrator = DriftIntegrator::new(d);
    let excess_rate = cfg.excess.map_or(0.0, |ex| ex.rate);
    let mut t = 0.0;
    let mut next_record = 0;

    loop {
        while next_record < record_grid.len() && record_grid[next_record] <= t {
            path.records.push(pair.snapshot(record_grid[next_record]));
            next_record += 1;
        }
        if t >= horizon {
            break;
        }
        let r = pair.r();
        let reflecting = !pair.merged && cfg.mode == CouplingMode::Mixed && r <= l0;
        let delta = if reflecting {
            cfg.delta_floor.max(cfg.eps_delta * a * r)
        } else {
            cfg.delta_floor
        };
        let dec = decompose(spec, delta)?;
        let total_rate = dec.rate_above + excess_rate;
        let window_end = (t + cfg.dt_max).min(horizon);

        while t < window_end {
            let wait: f64 = Exp1.sample(rng);
            let jump_at = t + wait / total_rate;
            let mut target = jump_at.min(window_end);
            if next_record < record_grid.len() {
                target = target.min(record_grid[next_record]);
            }
            let dt = target - t;
            if dt > 0.0 {
                let r_before = pair.r();
                if pair.merged {
                    path.steps += single_integrator.advance(field, &mut pair.state[..d], t, dt)?;
                } else {
                    path.steps += pair_integrator.advance(field, &mut pair.state, t, dt)?;
                }
                let r_after = pair.r();
                if path.hit_l0_time.is_none() && r_after <= l0 {
                    // Linear interpolation inside the last drift interval.
                    let frac = if r_before > r_after {
                        (r_before - l0) / (r_before - r_after)
                    } else {
                        1.0
                    };
                    path.hit_l0_time = Some(t + frac.clamp(0.0, 1.0) * dt);
                }
                let compensate = reflecting && cfg.compensate_small && !pair.merged;
                small_kick(
                    &mut pair,
                    dec.small_var_per_coord,
                    dt,
                    compensate,
                    spec,
                    a,
                    rng,
                )?;
                if pair.state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { t: target });
                }
            }
            t = target;
            if t == jump_at && t < horizon {
                path.jumps += 1;
                let stable = rng.random::<f64>() * total_rate < dec.rate_above;
                if stable {
                    dec.sample_large_jump_into(rng, &mut pair.z);
                } else {
                    let scale = cfg.excess.map_or(0.0, |ex| ex.scale);
                    for c in pair.z.iter_mut() {
                        let g: f64 = StandardNormal.sample(rng);
                        *c = scale * g;
                    }
                }
                // The reflection test uses the distance at the jump time.
                let r_now = pair.r();
                let reflect_it = stable
                    && !pair.merged
                    && cfg.mode == CouplingMode::Mixed
                    && r_now <= l0
                    && dot(&pair.z, &pair.z).sqrt() <= a * r_now;
                pair.apply(reflect_it, rng);
            }
            if !pair.merged && pair.r() <= cfg.eps_couple {
                pair.merge();
                path.merge_time = Some(t);
            }
            if path.hit_l0_time.is_none() && pair.r() <= l0 {
                path.hit_l0_time = Some(t);
            }
            if path.jumps + path.steps > cfg.max_events {
                return Err(Error::EventBudget {
                    budget: cfg.max_events,
                    t,
                });
            }
            if next_record < record_grid.len() && record_grid[next_record] <= t {
                break;
            }
        }
    }
    Ok(path)
}

// Gaussian stand-in for jumps below δ, shared by both components. With
// compensation, the share coming from the band |z| < min(δ, a r) is mirrored
// for y instead, which moves the gap along its own axis.
fn small_kick<R: Rng + ?Sized>(
    pair: &mut Pair,
    var_per_coord: f64,
    dt: f64,
    compensate: bool,
    spec: &StableSpec,
    a: f64,
    rng: &mut R,
) -> Result<()> {
    let d = pair.d;
    let band_var = if compensate {
        decompose(spec, a * pair.r())?
            .small_var_per_coord
            .min(var_per_coord)
    } else {
        0.0
    };
    let shared_sd = ((var_per_coord - band_var) * dt).sqrt();
    for k in pair.kick.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *k = shared_sd * g;
    }
    for i in 0..d {
        pair.state[i] += pair.kick[i];
    }
    if band_var > 0.0 {
        let sd = (band_var * dt).sqrt();
        for b in pair.band.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *b = sd * g;
        }
        std::mem::swap(&mut pair.z, &mut pair.band);
        pair.apply(true, rng);
        std::mem::swap(&mut pair.z, &mut pair.band);
    }
    Ok(())
}

/// Single (uncoupled) path: the scheme started from a merged pair.
#[allow(clippy::too_many_arguments)]
pub fn simulate_single_path<R: Rng + ?Sized>(
    x0: &[f64],
    field: &DriftField,
    spec: &StableSpec,
    psi: &PsiSpec,
    cfg: &SchemeConfig,
    horizon: f64,
    record_grid: &[f64],
    rng: &mut R,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let path = simulate_coupled_path(x0, x0, field, spec, psi, cfg, horizon, record_grid, rng)?;
    Ok(path.records.into_iter().map(|s| (s.t, s.x)).collect())
}

/// Inputs shared by every path of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSpec<'a> {
    pub x0: &'a [f64],
    pub y0: &'a [f64],
    pub field: &'a DriftField,
    pub spec: &'a StableSpec,
    pub psi: &'a PsiSpec,
    pub cfg: &'a SchemeConfig,
    pub horizon: f64,
    pub record_grid: &'a [f64],
}

/// Runs `paths` independent coupled paths; path `i` uses stream `i` of `seed`.
pub fn run_ensemble(job: &EnsembleSpec<'_>, paths: usize, seed: u64) -> Result<Vec<CoupledPath>> {
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            simulate_coupled_path(
                job.x0,
                job.y0,
                job.field,
                job.spec,
                job.psi,
                job.cfg,
                job.horizon,
                job.record_grid,
                &mut rng,
            )
            .map_err(|e| Error::Path {
                path_id: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Time from `r0` to `L0` under `dr = -K2 r^{θ-1} dt`, and its supremum `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingTime {
    pub bound: f64,
    pub t0: f64,
}

pub fn hitting_time_bound(r0: f64, cond: &DriftCondition) -> Result<HittingTime> {
    if !(cond.theta > 2.0) {
        return domain(format!(
            "hitting-time bound needs theta > 2, got {}",
            cond.theta
        ));
    }
    if !(r0 > cond.l0) {
        return domain(format!("r0 = {r0} must exceed L0 = {}", cond.l0));
    }
    let q = 2.0 - cond.theta;
    Ok(HittingTime {
        bound: (r0.powf(q) - cond.l0.powf(q)) / (cond.k2 * q),
        t0: cond.l0.powf(q) / (cond.k2 * (cond.theta - 2.0)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub t: f64,
    pub mean: f64,
    pub std_err: f64,
}

/// Ensemble mean and standard error of `ψ(|x_t - y_t|)` at each recorded time.
pub fn psi_decay_estimate(paths: &[CoupledPath], psi: &PsiSpec) -> Result<Vec<DecayPoint>> {
    let first = paths
        .first()
        .ok_or_else(|| Error::Domain("empty ensemble".into()))?;
    let n = first.records.len();
    if let Some(bad) = paths.iter().find(|p| p.records.len() != n) {
        return Err(Error::SizeMismatch {
            left: bad.records.len(),
            right: n,
        });
    }
    Ok((0..n)
        .map(|k| {
            let values = paths.iter().map(|p| psi.value(p.records[k].distance()));
            let (mean, std_err) = crate::diagnostics::mean_and_se(values);
            DecayPoint {
                t: first.records[k].t,
                mean,
                std_err,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{linear_drift, stable_potential_drift};
    use crate::psi::build_psi;

    fn setup(alpha: f64) -> (StableSpec, PsiSpec) {
        let spec = StableSpec::new(1, alpha).unwrap();
        let cond = DriftCondition::new(1.0, 1.0, 1.0, 2.0).unwrap();
        (spec, build_psi(&spec, &cond).unwrap())
    }

    #[test]
    fn reflection_examples() {
        assert_eq!(
            reflect(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]),
            vec![0.0, 1.0]
        );
        assert_eq!(
            reflect(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]),
            vec![-1.0, 0.0]
        );
        assert_eq!(
            reflect(&[2.0, 3.0], &[2.0, 3.0], &[0.5, -1.0]),
            vec![-0.5, 1.0]
        );
    }

    #[test]
    fn coupled_jump_branches() {
        let mut rng = stream(1, 0);
        let near = CoupledState::new(0.0, vec![0.5, 0.0], vec![0.0, 0.0], false);
        let z = [0.1, 0.05];
        let (dx, dy) = coupled_jump(&near, &z, JumpChannel::Stable, 0.5, 1.0, &mut rng);
        assert_ne!(dx, dy);
        let r_new = distance(
            &near
                .x
                .iter()
                .zip(&dx)
                .map(|(p, q)| p + q)
                .collect::<Vec<_>>(),
            &near
                .y
                .iter()
                .zip(&dy)
                .map(|(p, q)| p + q)
                .collect::<Vec<_>>(),
        );
        let r = 0.5;
        let expected = (r + 2.0 * z[0]).abs().min((r - 2.0 * z[0]).abs());
        let other = (r + 2.0 * z[0]).abs().max((r - 2.0 * z[0]).abs());
        assert!((r_new - expected).abs() < 1e-15 || (r_new - other).abs() < 1e-15);
        let big = [0.4, 0.0];
        let (dx, dy) = coupled_jump(&near, &big, JumpChannel::Stable, 0.5, 1.0, &mut rng);
        assert_eq!(dx, dy);
        let far = CoupledState::new(0.0, vec![2.0, 0.0], vec![0.0, 0.0], false);
        let (dx, dy) = coupled_jump(&far, &z, JumpChannel::Stable, 0.5, 1.0, &mut rng);
        assert_eq!(dx, dy);
        let (dx, dy) = coupled_jump(&near, &z, JumpChannel::Excess, 0.5, 1.0, &mut rng);
        assert_eq!(dx, dy);
    }

    #[test]
    fn drift_step_examples() {
        let lin = linear_drift(1.5, 2).unwrap();
        let out = step_drift(&[1.0, -2.0], &lin, 0.7).unwrap();
        let decay = (-1.5f64 * 0.7).exp();
        assert!((out[0] - decay).abs() < 1e-9 * decay);
        assert!((out[1] + 2.0 * decay).abs() < 1e-9 * decay);

        let zero = crate::drift::radial_power_drift(vec![], 1, "zero").unwrap();
        assert_eq!(step_drift(&[0.3], &zero, 1.0).unwrap(), vec![0.3]);

        let pot = stable_potential_drift(1.5, 1).unwrap();
        let out = step_drift(&[1.0], &pot, 0.1).unwrap();
        assert!((out[0] - 1.0 / 1.3).abs() < 1e-8);
    }

    #[test]
    fn grid_includes_horizon() {
        assert_eq!(
            uniform_grid(1.0, 0.25).unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(uniform_grid(1.0, 0.3).unwrap().last(), Some(&1.0));
    }

    #[test]
    fn equal_start_merges_at_zero() {
        let (spec, psi) = setup(1.5);
        let field = stable_potential_drift(1.5, 1).unwrap();
        let cfg = SchemeConfig::for_l0(1.0);
        let grid = uniform_grid(0.5, 0.1).unwrap();
        let path = simulate_coupled_path(
            &[0.2],
            &[0.2],
            &field,
            &spec,
            &psi,
            &cfg,
            0.5,
            &grid,
            &mut stream(2, 0),
        )
        .unwrap();
        assert_eq!(path.merge_time, Some(0.0));
        assert_eq!(path.records.len(), grid.len());
        assert!(path.records.iter().all(|s| s.merged && s.x == s.y));
    }

    #[test]
    fn merge_is_absorbing() {
        let (spec, psi) = setup(1.5);
        let field = stable_potential_drift(1.5, 1).unwrap();
        let cfg = SchemeConfig {
            eps_couple: 1e-2,
            ..SchemeConfig::for_l0(1.0)
        };
        let grid = uniform_grid(2.0, 0.05).unwrap();
        let mut merged_any = false;
        for i in 0..20 {
            let path = simulate_coupled_path(
                &[0.05],
                &[0.0],
                &field,
                &spec,
                &psi,
                &cfg,
                2.0,
                &grid,
                &mut stream(3, i),
            )
            .unwrap();
            let first = path.records.iter().position(|s| s.merged);
            if let Some(k) = first {
                merged_any = true;
                assert!(path.records[k..].iter().all(|s| s.merged && s.x == s.y));
            }
        }
        assert!(merged_any);
    }

    #[test]
    fn hitting_time_examples() {
        let cond = DriftCondition::new(1.0, 1.0, 1.0, 3.0).unwrap();
        let h = hitting_time_bound(2.0, &cond).unwrap();
        assert!((h.bound - 0.5).abs() < 1e-15);
        assert_eq!(h.t0, 1.0);
        assert!(hitting_time_bound(1.0 + 1e-12, &cond).unwrap().bound < 1e-11);
        assert!((hitting_time_bound(1e12, &cond).unwrap().bound - 1.0).abs() < 1e-11);
        assert!(hitting_time_bound(0.5, &cond).is_err());
        let flat = DriftCondition::new(1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(hitting_time_bound(2.0, &flat).is_err());
    }

    #[test]
    fn decay_estimate_trivial_cases() {
        let (spec, psi) = setup(1.5);
        let field = stable_potential_drift(1.5, 1).unwrap();
        let cfg = SchemeConfig::for_l0(1.0);
        let grid = uniform_grid(0.2, 0.1).unwrap();
        let job = EnsembleSpec {
            x0: &[0.25],
            y0: &[-0.25],
            field: &field,
            spec: &spec,
            psi: &psi,
            cfg: &cfg,
            horizon: 0.2,
            record_grid: &grid,
        };
        let paths = run_ensemble(&job, 16, 5).unwrap();
        let decay = psi_decay_estimate(&paths, &psi).unwrap();
        assert_eq!(decay[0].mean, psi.value(0.5));
        assert_eq!(decay[0].std_err, 0.0);

        let job = EnsembleSpec { y0: &[0.25], ..job };
        let merged = run_ensemble(&job, 4, 5).unwrap();
        assert!(psi_decay_estimate(&merged, &psi)
            .unwrap()
            .iter()
            .all(|p| p.mean == 0.0 && p.std_err == 0.0));
    }

    #[test]
    fn ensemble_is_reproducible() {
        let (spec, psi) = setup(1.5);
        let field = linear_drift(1.0, 1).unwrap();
        let cfg = SchemeConfig::for_l0(1.0);
        let grid = uniform_grid(0.3, 0.1).unwrap();
        let job = EnsembleSpec {
            x0: &[0.3],
            y0: &[0.0],
            field: &field,
            spec: &spec,
            psi: &psi,
            cfg: &cfg,
            horizon: 0.3,
            record_grid: &grid,
        };
        assert_eq!(
            run_ensemble(&job, 4, 11).unwrap(),
            run_ensemble(&job, 4, 11).unwrap()
        );
    }

    #[test]
    fn event_budget_is_enforced() {
        let (spec, psi) = setup(1.5);
        let field = linear_drift(1.0, 1).unwrap();
        let cfg = SchemeConfig {
            max_events: 10,
            ..SchemeConfig::for_l0(1.0)
        };
        let grid = [1.0];
        let res = simulate_coupled_path(
            &[0.3],
            &[0.0],
            &field,
            &spec,
            &psi,
            &cfg,
            1.0,
            &grid,
            &mut stream(1, 1),
        );
        assert!(matches!(res, Err(Error::EventBudget { .. })));
    }
}
