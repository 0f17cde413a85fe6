//! Piecewise Lyapunov profiles `ψ` for the distance process.
//!
//! Both profiles are concave on `[0, 2L0]` and continue with an exponential
//! piece `A e^{g (r - 2L0)} + B (r - 2L0)^2 + const` that is glued `C²` at `2L0`:
//!
//! * `α ∈ (1, 2)`: `ψ(r) = 1 - e^{-c1 r}` with growth `g = c2 = 20 c1`;
//! * `α ∈ (0, 1]`: `ψ(r) = r - c r^{1+α}` with growth `g = c0 = 10 α / L0`.

use crate::drift::{check_small_alpha_gate, DriftCondition};
use crate::error::{domain, Error, Result};
use crate::stable_noise::StableSpec;

/// Radial test function acting on `r = |x - y|`.
pub trait RadialProfile {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;

    /// `ψ(r + 2u) + ψ(r - 2u) - 2ψ(r)`.
    fn second_difference(&self, r: f64, u: f64) -> f64 {
        self.value(r + 2.0 * u) + self.value(r - 2.0 * u) - 2.0 * self.value(r)
    }

    /// `ψ'(r) / ψ(r)`.
    fn log_derivative(&self, r: f64) -> f64 {
        self.derivative(r) / self.value(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `α ∈ (1, 2)`
    HighAlpha,
    /// `α ∈ (0, 1]`
    LowAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiSpec {
    pub regime: Regime,
    pub l0: f64,
    pub alpha: f64,
    /// Reflection radius factor: jumps with `|z| <= a r` are reflected.
    pub a: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c: Option<f64>,
    pub c0: Option<f64>,
    /// `A`
    pub amp: f64,
    /// `B`
    pub quad: f64,
    /// `2 C_{d,α} ω_d L0^{1-α} / (d (2-α))`, high-index regime only.
    pub big_c: Option<f64>,
    growth: f64,
    offset: f64,
}

/// Values and derivatives of one branch at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

pub fn build_psi(spec: &StableSpec, cond: &DriftCondition) -> Result<PsiSpec> {
    let alpha = spec.alpha();
    let l0 = cond.l0;
    if alpha > 1.0 {
        let big_c = 2.0 * spec.c_dalpha() * spec.omega_d() * l0.powf(1.0 - alpha)
            / (spec.d() as f64 * (2.0 - alpha));
        let c1 = (2.0 * cond.k1 / big_c).powf(1.0 / (alpha - 1.0))
            * (2.0 * l0 / (alpha - 1.0)).exp()
            + 2.0;
        let c2 = 20.0 * c1;
        let scale = (-2.0 * l0 * c1).exp();
        if !c1.is_finite() || scale == 0.0 {
            return domain(format!(
                "profile constants degenerate: c1 = {c1:e}, e^(-2 L0 c1) underflows"
            ));
        }
        let amp = c1 / c2 * scale;
        let quad = -0.5 * (c1 + c2) * c1 * scale;
        let offset = -(-2.0 * c1 * l0).exp_m1() - amp;
        Ok(PsiSpec {
            regime: Regime::HighAlpha,
            l0,
            alpha,
            a: 1.0 / c1,
            c1: Some(c1),
            c2: Some(c2),
            c: None,
            c0: None,
            amp,
            quad,
            big_c: Some(big_c),
            growth: c2,
            offset,
        })
    } else {
        let gate = check_small_alpha_gate(spec, cond);
        if !gate.passed {
            return Err(Error::GateFailure {
                margin: gate.margin,
            });
        }
        let c = 1.0 / (2f64.powf(1.0 + alpha) * (1.0 + alpha) * l0.powf(alpha));
        let c0 = 10.0 * alpha / l0;
        let amp = 1.0 / (2.0 * c0);
        let quad = -0.5 * (alpha / (4.0 * l0) + 0.5 * c0);
        let offset = 2.0 * l0 - c * (2.0 * l0).powf(1.0 + alpha) - amp;
        Ok(PsiSpec {
            regime: Regime::LowAlpha,
            l0,
            alpha,
            a: 0.25,
            c1: None,
            c2: None,
            c: Some(c),
            c0: Some(c0),
            amp,
            quad,
            big_c: None,
            growth: c0,
            offset,
        })
    }
}

impl PsiSpec {
    /// Growth rate of the exponential piece (`c2` or `c0`).
    pub fn growth(&self) -> f64 {
        self.growth
    }

    /// Constant term of the exponential piece.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `ψ'(0)`; `ψ(r) <= ψ'(0) r` by concavity.
    pub fn slope_at_zero(&self) -> f64 {
        match self.regime {
            Regime::HighAlpha => self.c1.unwrap_or(f64::NAN),
            Regime::LowAlpha => 1.0,
        }
    }

    /// The concave branch, evaluated at any `r >= 0` (also beyond `2L0`).
    pub fn inner_jet(&self, r: f64) -> Jet {
        match self.regime {
            Regime::HighAlpha => {
                let c1 = self.c1.unwrap_or(f64::NAN);
                let e = (-c1 * r).exp();
                Jet {
                    value: -(-c1 * r).exp_m1(),
                    first: c1 * e,
                    second: -c1 * c1 * e,
                }
            }
            Regime::LowAlpha => {
                let c = self.c.unwrap_or(f64::NAN);
                let p = 1.0 + self.alpha;
                let second = if r == 0.0 && self.alpha < 1.0 {
                    f64::NEG_INFINITY
                } else {
                    -c * p * self.alpha * r.powf(self.alpha - 1.0)
                };
                Jet {
                    value: r - c * r.powf(p),
                    first: 1.0 - c * p * r.powf(self.alpha),
                    second,
                }
            }
        }
    }

    /// The exponential branch, evaluated at any `r` (also below `2L0`).
    pub fn outer_jet(&self, r: f64) -> Jet {
        let s = r - 2.0 * self.l0;
        let g = self.growth;
        let e = self.amp * (g * s).exp();
        Jet {
            value: e + self.quad * s * s + self.offset,
            first: g * e + 2.0 * self.quad * s,
            second: g * g * e + 2.0 * self.quad,
        }
    }

    fn jet(&self, r: f64) -> Jet {
        if r <= 2.0 * self.l0 {
            self.inner_jet(r)
        } else {
            self.outer_jet(r)
        }
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        self.jet(r).second
    }

    /// `g(r) = ½ A g e^{g (r - 2L0)} + 2B (r - 2L0)`.
    pub fn g_function(&self, r: f64) -> f64 {
        let s = r - 2.0 * self.l0;
        0.5 * self.amp * self.growth * (self.growth * s).exp() + 2.0 * self.quad * s
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 0.0) {
        return domain(format!("radius must be non-negative, got {r}"));
    }
    Ok(())
}

pub fn psi_eval(psi: &PsiSpec, r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(psi.value(r))
}

pub fn psi_prime(psi: &PsiSpec, r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(psi.derivative(r))
}

pub fn psi_second(psi: &PsiSpec, r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(psi.second_derivative(r))
}

// Generalized binomial coefficient C(p, k).
fn binom(p: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (p - j as f64) / (j + 1) as f64)
}

/// `(1+x)^p + (1-x)^p - 2` without cancellation for small `x`.
fn symmetric_power_difference(p: f64, x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        2.0 * (binom(p, 2) * x2
            + binom(p, 4) * x2 * x2
            + binom(p, 6) * x2 * x2 * x2
            + binom(p, 8) * x2 * x2 * x2 * x2)
    } else {
        (1.0 + x).powf(p) + (1.0 - x).powf(p) - 2.0
    }
}

impl RadialProfile for PsiSpec {
    fn value(&self, r: f64) -> f64 {
        self.jet(r).value
    }

    fn derivative(&self, r: f64) -> f64 {
        self.jet(r).first
    }

    fn second_difference(&self, r: f64, u: f64) -> f64 {
        let u = u.abs();
        if r - 2.0 * u < 0.0 || r + 2.0 * u > 2.0 * self.l0 {
            return self.value(r + 2.0 * u) + self.value((r - 2.0 * u).max(0.0))
                - 2.0 * self.value(r);
        }
        match self.regime {
            Regime::HighAlpha => {
                let c1 = self.c1.unwrap_or(f64::NAN);
                let sh = (c1 * u).sinh();
                -4.0 * (-c1 * r).exp() * sh * sh
            }
            Regime::LowAlpha => {
                if r == 0.0 {
                    return 0.0;
                }
                let c = self.c.unwrap_or(f64::NAN);
                let p = 1.0 + self.alpha;
                -c * r.powf(p) * symmetric_power_difference(p, 2.0 * u / r)
            }
        }
    }

    fn log_derivative(&self, r: f64) -> f64 {
        if r <= 2.0 * self.l0 {
            return match self.regime {
                Regime::HighAlpha => {
                    let c1 = self.c1.unwrap_or(f64::NAN);
                    c1 / (c1 * r).exp_m1()
                }
                Regime::LowAlpha => {
                    let jet = self.inner_jet(r);
                    jet.first / jet.value
                }
            };
        }
        let s = r - 2.0 * self.l0;
        let log_e = self.amp.ln() + self.growth * s;
        if log_e < 600.0 {
            let jet = self.outer_jet(r);
            return jet.first / jet.value;
        }
        let inv = (-log_e).exp();
        (self.growth + 2.0 * self.quad * s * inv) / (1.0 + (self.quad * s * s + self.offset) * inv)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GReport {
    /// Unique stationary point of `g` on `[2L0, ∞)`.
    pub r1: f64,
    pub g_r1: f64,
    /// `1 - log(-4B / (A g²))`; `g(r1) = (-2B/g) · bracket`.
    pub bracket: f64,
    pub g_at_2l0: f64,
    pub min_on_grid: f64,
    pub failure: Option<f64>,
}

impl GReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Positivity of `g` at its minimizer and on every grid point `>= 2L0`.
pub fn g_positivity_check(psi: &PsiSpec, grid: &[f64]) -> GReport {
    let g = psi.growth;
    let log_ratio = (-4.0 * psi.quad / (psi.amp * g * g)).ln();
    let bracket = 1.0 - log_ratio;
    let r1 = 2.0 * psi.l0 + log_ratio / g;
    let g_r1 = -2.0 * psi.quad / g * bracket;
    let g_at_2l0 = psi.g_function(2.0 * psi.l0);
    let mut min_on_grid = f64::INFINITY;
    let mut failure = None;
    for &r in grid.iter().filter(|&&r| r >= 2.0 * psi.l0) {
        let v = psi.g_function(r);
        min_on_grid = min_on_grid.min(v);
        if !(v > 0.0) && failure.is_none() {
            failure = Some(r);
        }
    }
    if !(g_r1 > 0.0) {
        failure = failure.or(Some(r1));
    }
    GReport {
        r1,
        g_r1,
        bracket,
        g_at_2l0,
        min_on_grid,
        failure,
    }
}
