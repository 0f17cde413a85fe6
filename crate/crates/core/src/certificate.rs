//! Generator bounds for `ψ` and the assembled contraction certificate.
//!
//! For a pair at distance `r` the coupled generator applied to `ψ(|x-y|)` is
//! bounded by `J(r) + ψ'(r) D(r)`, where `D` is the worst radial drift allowed by
//! the drift condition and `J` is the reflected jump part
//!
//! ```text
//! J(r) = ½ ∫_{|z| <= a r} [ψ(r + 2 z_1) + ψ(r - 2 z_1) - 2 ψ(r)] C_{d,α} |z|^{-d-α} dz
//! ```
//!
//! for `r <= L0` and zero beyond, where the coupling is synchronous.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::drift::{check_small_alpha_gate, DriftCondition};
use crate::error::{domain, Error, Result};
use crate::psi::{build_psi, PsiSpec, RadialProfile, Regime};
use crate::quadrature::{integrate, QuadConfig};
use crate::stable_noise::{sphere_surface, StableSpec};

/// Jump part `J(r)` for any radial profile with reflection radius `a r`.
///
/// Polar coordinates `z = s θ` with `s = (a r) u^{1/(2-α)}` turn the
/// `s^{1-α}` behaviour at the origin into a smooth integrand on `u ∈ [0, 1]`.
pub fn jump_part<P: RadialProfile>(
    profile: &P,
    a: f64,
    spec: &StableSpec,
    r: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!("radius must be positive, got {r}"));
    }
    let alpha = spec.alpha();
    let d = spec.d();
    let rho = a * r;
    let kappa = 1.0 / (2.0 - alpha);
    let inner_cfg = QuadConfig {
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol,
        max_subdivisions: cfg.max_subdivisions,
    };
    let omega_lower = if d >= 2 { sphere_surface(d - 1)? } else { 0.0 };
    let mut inner_failure = None;

    // Sphere integral of h(r, s θ_1) / s^2.
    let mut sphere = |s: f64| -> f64 {
        if d == 1 {
            return 2.0 * profile.second_difference(r, s) / (s * s);
        }
        let res = integrate(
            |phi: f64| profile.second_difference(r, s * phi.cos()) * phi.sin().powi(d as i32 - 2),
            0.0,
            std::f64::consts::PI,
            &inner_cfg,
        );
        if !res.converged && inner_failure.is_none() {
            inner_failure = Some(res);
        }
        omega_lower * res.value / (s * s)
    };

    let outer = integrate(
        |u: f64| {
            let s = rho * u.powf(kappa);
            if s == 0.0 {
                return 0.0;
            }
            sphere(s)
        },
        0.0,
        1.0,
        cfg,
    );
    if let Some(res) = inner_failure {
        return Err(Error::Quadrature {
            r,
            err: res.abs_err,
            subdivisions: res.subdivisions,
        });
    }
    if !outer.converged {
        return Err(Error::Quadrature {
            r,
            err: outer.abs_err,
            subdivisions: outer.subdivisions,
        });
    }
    Ok(0.5 * spec.c_dalpha() * rho.powf(2.0 - alpha) * kappa * outer.value)
}

/// Worst-case value of the coupled generator on `ψ` at distance `r`.
pub fn radial_generator_bound(
    psi: &PsiSpec,
    spec: &StableSpec,
    cond: &DriftCondition,
    r: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    let drift = psi.derivative(r) * cond.radial_drift(r);
    if r > cond.l0 {
        return Ok(drift);
    }
    Ok(jump_part(psi, psi.a, spec, r, cfg)? + drift)
}

/// `-L̃ψ(r) / ψ(r)`, evaluated without overflow for large `r`.
pub fn lyapunov_ratio(
    psi: &PsiSpec,
    spec: &StableSpec,
    cond: &DriftCondition,
    r: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    if r > cond.l0 {
        return Ok(-cond.radial_drift(r) * psi.log_derivative(r));
    }
    Ok(-radial_generator_bound(psi, spec, cond, r, cfg)? / psi.value(r))
}

/// Closed-form small-distance rate for the regime of `psi`.
pub fn certified_lambda1(psi: &PsiSpec, spec: &StableSpec, cond: &DriftCondition) -> Result<f64> {
    match psi.regime {
        Regime::HighAlpha => {
            let big_c = psi.big_c.unwrap_or(f64::NAN);
            let c1 = psi.c1.unwrap_or(f64::NAN);
            Ok(big_c * c1.powf(spec.alpha() - 1.0) * (-2.0 * cond.l0).exp() / 2.0)
        }
        Regime::LowAlpha => {
            let gate = check_small_alpha_gate(spec, cond);
            if !gate.passed {
                return Err(Error::GateFailure {
                    margin: gate.margin,
                });
            }
            Ok(gate.margin / cond.l0.powf(spec.alpha()))
        }
    }
}

/// Radii used for numerical infima.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub points: Vec<f64>,
}

impl RadialGrid {
    /// `n` geometric points on `(lo·L0, hi·L0]`, plus `L0` and `2L0`.
    pub fn geometric(l0: f64, n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || !(lo > 0.0) || !(hi > lo) {
            return domain(format!("bad grid: n = {n}, range ({lo}, {hi}]"));
        }
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        let mut points: Vec<f64> = (0..n).map(|i| l0 * lo * ratio.powi(i as i32)).collect();
        points[n - 1] = l0 * hi;
        points.extend([l0, 2.0 * l0]);
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(Self { points })
    }

    /// 400 points on `(1e-4 L0, 10 L0]`.
    pub fn standard(l0: f64) -> Self {
        Self::geometric(l0, 400, 1e-4, 10.0).expect("fixed grid parameters are valid")
    }

    pub fn max(&self) -> f64 {
        self.points.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub r: f64,
    /// `-L̃ψ(r) / ψ(r)`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSweep {
    pub points: Vec<SweepPoint>,
    /// Infimum of the ratio over grid points `r <= L0`.
    pub lambda_small: f64,
    /// Infimum of the ratio over grid points `r > L0`.
    pub lambda_large: f64,
    /// Grid point attaining the overall infimum.
    pub worst_r: f64,
    /// The ratio is increasing at the last grid point.
    pub tail_increasing: bool,
}

impl LyapunovSweep {
    pub fn lambda_star(&self) -> f64 {
        self.lambda_small.min(self.lambda_large)
    }
}

/// Sweeps `-L̃ψ/ψ` over the grid in parallel.
pub fn lyapunov_sweep(
    psi: &PsiSpec,
    spec: &StableSpec,
    cond: &DriftCondition,
    grid: &RadialGrid,
    cfg: &QuadConfig,
) -> Result<LyapunovSweep> {
    if grid.points.is_empty() {
        return domain("empty radial grid");
    }
    let points = grid
        .points
        .par_iter()
        .map(|&r| lyapunov_ratio(psi, spec, cond, r, cfg).map(|ratio| SweepPoint { r, ratio }))
        .collect::<Result<Vec<_>>>()?;
    let inf_over = |keep: &dyn Fn(f64) -> bool| {
        points
            .iter()
            .filter(|p| keep(p.r))
            .map(|p| p.ratio)
            .fold(f64::INFINITY, f64::min)
    };
    let lambda_small = inf_over(&|r| r <= cond.l0);
    let lambda_large = inf_over(&|r| r > cond.l0);
    let worst_r = points
        .iter()
        .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .map(|p| p.r)
        .unwrap_or(f64::NAN);
    let r_max = grid.max();
    let at_max = lyapunov_ratio(psi, spec, cond, r_max, cfg)?;
    let beyond = lyapunov_ratio(psi, spec, cond, r_max * 1.001, cfg)?;
    Ok(LyapunovSweep {
        points,
        lambda_small,
        lambda_large,
        worst_r,
        tail_increasing: beyond >= at_max,
    })
}

/// Infimum `λ*` of `-L̃ψ/ψ` over the grid; fails if it is not positive.
pub fn numeric_lambda(
    psi: &PsiSpec,
    spec: &StableSpec,
    cond: &DriftCondition,
    grid: &RadialGrid,
    cfg: &QuadConfig,
) -> Result<f64> {
    let sweep = lyapunov_sweep(psi, spec, cond, grid, cfg)?;
    let lambda = sweep.lambda_star();
    if !(lambda > 0.0) {
        return Err(Error::Certificate {
            quantity: "lambda*",
            value: lambda,
            r: sweep.worst_r,
        });
    }
    Ok(lambda)
}

/// Where a certificate constant comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    NumericInfimum,
    Assembled,
    Input,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::NumericInfimum => "numeric-infimum",
            Provenance::Assembled => "assembled",
            Provenance::Input => "input",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(Provenance::ClosedForm),
            "numeric-infimum" => Ok(Provenance::NumericInfimum),
            "assembled" => Ok(Provenance::Assembled),
            "input" => Ok(Provenance::Input),
            other => domain(format!("unknown provenance tag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionCertificate {
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Numerical infimum of `-L̃ψ/ψ` on `(0, L0]`.
    pub lambda_small: f64,
    pub c_p: f64,
    pub c2_chain: f64,
    pub t0: f64,
    pub p: f64,
    pub l0: f64,
    pub theta: f64,
    /// Prefactor `C` of the `W_p` bound.
    pub prefactor: f64,
    pub tail_increasing: bool,
}

impl ContractionCertificate {
    /// `C e^{-λt/p} (r^{1/p} ∨ r) / (1 + r 1{t > 1})`; the denominator only for `θ > 2`.
    pub fn wp_bound(&self, r0: f64, t: f64) -> f64 {
        let spread = r0.powf(1.0 / self.p).max(r0);
        let damping = if self.theta > 2.0 && t > 1.0 {
            1.0 + r0
        } else {
            1.0
        };
        self.prefactor * (-self.lambda * t / self.p).exp() * spread / damping
    }

    fn entries(&self) -> Vec<(&'static str, f64, Provenance)> {
        vec![
            ("lambda", self.lambda, Provenance::Assembled),
            ("lambda1", self.lambda1, Provenance::ClosedForm),
            ("lambda2", self.lambda2, Provenance::NumericInfimum),
            (
                "lambda_small",
                self.lambda_small,
                Provenance::NumericInfimum,
            ),
            ("c_p", self.c_p, Provenance::NumericInfimum),
            ("c2_chain", self.c2_chain, Provenance::Assembled),
            ("t0", self.t0, Provenance::ClosedForm),
            ("prefactor", self.prefactor, Provenance::Assembled),
            ("p", self.p, Provenance::Input),
            ("l0", self.l0, Provenance::Input),
            ("theta", self.theta, Provenance::Input),
            (
                "tail_increasing",
                if self.tail_increasing { 1.0 } else { 0.0 },
                Provenance::NumericInfimum,
            ),
        ]
    }

    /// Parses the record written by `Display`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut get = std::collections::HashMap::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (name, rest) = line
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("bad record line {line:?}")))?;
            let mut fields = rest.split_whitespace();
            let value: f64 = fields
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Domain(format!("bad value in {line:?}")))?;
            if let Some(tag) = fields.next() {
                tag.parse::<Provenance>()?;
            }
            get.insert(name.trim().to_string(), value);
        }
        let field = |name: &str| {
            get.get(name)
                .copied()
                .ok_or_else(|| Error::Domain(format!("missing {name}")))
        };
        Ok(Self {
            lambda: field("lambda")?,
            lambda1: field("lambda1")?,
            lambda2: field("lambda2")?,
            lambda_small: field("lambda_small")?,
            c_p: field("c_p")?,
            c2_chain: field("c2_chain")?,
            t0: if field("theta")? > 2.0 {
                field("t0")?
            } else {
                0.0
            },
            prefactor: field("prefactor")?,
            p: field("p")?,
            l0: field("l0")?,
            theta: field("theta")?,
            tail_increasing: field("tail_increasing")? != 0.0,
        })
    }
}

impl fmt::Display for ContractionCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, value, tag) in self.entries() {
            // t0 only exists for θ > 2.
            if name == "t0" && self.theta <= 2.0 {
                continue;
            }
            writeln!(f, "{name} = {value:e} {}", tag.tag())?;
        }
        Ok(())
    }
}

// Golden-section refinement of a maximum bracketed by [lo, hi].
fn refine_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    fa.max(fb)
}

/// `sup_{r > 0} r^p / ψ(r)`. The ratio tends to `1/ψ'(0)` or `0` at the
/// origin and to `0` at infinity, so a fine scan plus local refinement finds it.
pub fn moment_ratio_sup(psi: &PsiSpec, p: f64) -> f64 {
    // Work with logs so the exponential piece cannot overflow.
    let log_ratio = |r: f64| p * r.ln() - log_psi(psi, r);
    let n = 4000;
    let (lo, hi) = (1e-8 * psi.l0, 100.0 * psi.l0);
    let step = (hi / lo).ln() / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
    let values: Vec<f64> = grid.iter().map(|&r| log_ratio(r)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let left = grid[best.saturating_sub(1)];
    let right = grid[(best + 1).min(n - 1)];
    let at_zero = if p == 1.0 {
        -psi.slope_at_zero().ln()
    } else {
        f64::NEG_INFINITY
    };
    refine_max(&log_ratio, left, right)
        .max(values[best])
        .max(at_zero)
        .exp()
}

fn log_psi(psi: &PsiSpec, r: f64) -> f64 {
    let v = psi.value(r);
    if v.is_finite() {
        return v.ln();
    }
    // ψ ≈ A e^{g s} (1 + (B s² + offset) e^{-ln A - g s}).
    let s = r - 2.0 * psi.l0;
    let log_e = psi.amp.ln() + psi.growth() * s;
    log_e + (1.0 + (psi.quad * s * s + psi.offset()) * (-log_e).exp()).ln()
}

/// Assembles `(λ, C, t0)` for the `W_p` contraction bound.
///
/// The reported rate is `min(λ1, λ_small, λ2)`: the closed-form `λ1` is only
/// used together with the numerical infimum on `(0, L0]`.
pub fn certificate_constants(
    spec: &StableSpec,
    cond: &DriftCondition,
    p: f64,
    grid: &RadialGrid,
    cfg: &QuadConfig,
) -> Result<ContractionCertificate> {
    if !(p >= 1.0) || !p.is_finite() {
        return domain(format!("p must be >= 1, got {p}"));
    }
    let psi = build_psi(spec, cond)?;
    let lambda1 = certified_lambda1(&psi, spec, cond)?;
    let sweep = lyapunov_sweep(&psi, spec, cond, grid, cfg)?;
    let lambda2 = sweep.lambda_large;
    let lambda = lambda1.min(sweep.lambda_small).min(lambda2);
    if !(lambda > 0.0) {
        return Err(Error::Certificate {
            quantity: "lambda",
            value: lambda,
            r: sweep.worst_r,
        });
    }
    let c_p = moment_ratio_sup(&psi, p) * psi.slope_at_zero();
    if !c_p.is_finite() {
        return Err(Error::Certificate {
            quantity: "c_p",
            value: c_p,
            r: f64::NAN,
        });
    }
    let l0 = cond.l0;
    let c2_chain = 2.0 * c_p.powf(1.0 / p) * l0.powf(1.0 / p - 1.0);
    let (t0, prefactor) = if cond.theta > 2.0 {
        let t0 = l0.powf(2.0 - cond.theta) / (cond.k2 * (cond.theta - 2.0));
        let r1 = (cond.k2 * (cond.theta - 2.0)).powf(-1.0 / (cond.theta - 2.0));
        let c_large =
            (c_p * l0).max(r1.powf(p)).powf(1.0 / p) * (lambda * t0 / p).exp() * (1.0 + l0) / l0;
        (
            t0,
            (c_p.powf(1.0 / p) * (1.0 + l0)).max(c2_chain).max(c_large),
        )
    } else {
        (0.0, c_p.powf(1.0 / p).max(c2_chain))
    };
    Ok(ContractionCertificate {
        lambda,
        lambda1,
        lambda2,
        lambda_small: sweep.lambda_small,
        c_p,
        c2_chain,
        t0,
        p,
        l0,
        theta: cond.theta,
        prefactor,
        tail_increasing: sweep.tail_increasing,
    })
}
