//! Drift fields `b` and empirical checks of the two-regime dissipativity
//! condition
//!
//! ```text
//! <b(x) - b(y), x - y> <=  K1 |x-y|^2       for |x-y| <= L0
//! <b(x) - b(y), x - y> <= -K2 |x-y|^theta   for |x-y| >  L0
//! ```

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::diagnostics::sample_in_ball;
use crate::error::{domain, Result};
use crate::stable_noise::{sample_unit_direction, StableSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftCondition {
    pub k1: f64,
    pub k2: f64,
    pub l0: f64,
    pub theta: f64,
}

impl DriftCondition {
    pub fn new(k1: f64, k2: f64, l0: f64, theta: f64) -> Result<Self> {
        for (name, v) in [("K1", k1), ("K2", k2), ("L0", l0)] {
            if !(v > 0.0) || !v.is_finite() {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(theta >= 2.0) || !theta.is_finite() {
            return domain(format!("theta must be >= 2, got {theta}"));
        }
        Ok(Self { k1, k2, l0, theta })
    }

    /// Right-hand side of the condition at distance `r`.
    pub fn bound(&self, r: f64) -> f64 {
        if r <= self.l0 {
            self.k1 * r * r
        } else {
            -self.k2 * r.powf(self.theta)
        }
    }

    /// Worst-case radial drift `<b(x)-b(y), e>` at distance `r`, `e = (x-y)/r`.
    pub fn radial_drift(&self, r: f64) -> f64 {
        if r <= self.l0 {
            self.k1 * r
        } else {
            -self.k2 * r.powf(self.theta - 1.0)
        }
    }
}

/// One term of `b(x) = -Σ c |x|^q x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub coef: f64,
    pub power: f64,
}

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub enum DriftKind {
    RadialPower(Vec<PowerTerm>),
    Custom(Arc<DriftFn>),
}

impl fmt::Debug for DriftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftKind::RadialPower(terms) => f.debug_tuple("RadialPower").field(terms).finish(),
            DriftKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DriftField {
    pub kind: DriftKind,
    pub dim: usize,
    pub label: String,
    pub claimed_condition: Option<DriftCondition>,
}

impl DriftField {
    pub fn custom(
        dim: usize,
        label: impl Into<String>,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: DriftKind::Custom(Arc::new(f)),
            dim,
            label: label.into(),
            claimed_condition: None,
        }
    }

    pub fn with_condition(mut self, cond: DriftCondition) -> Self {
        self.claimed_condition = Some(cond);
        self
    }

    #[inline]
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            DriftKind::RadialPower(terms) => {
                let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
                let mut factor = 0.0;
                for term in terms {
                    factor -= if term.power == 0.0 {
                        term.coef
                    } else if norm == 0.0 {
                        0.0
                    } else if term.power == 1.0 {
                        term.coef * norm
                    } else {
                        term.coef * norm.powf(term.power)
                    };
                }
                for (o, c) in out.iter_mut().zip(x) {
                    *o = factor * c;
                }
            }
            DriftKind::Custom(f) => f(x, out),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.evaluate_into(x, &mut out);
        out
    }

    /// `<b(x) - b(y), x - y>`.
    pub fn monotonicity(&self, x: &[f64], y: &[f64]) -> f64 {
        let bx = self.evaluate(x);
        let by = self.evaluate(y);
        bx.iter()
            .zip(&by)
            .zip(x.iter().zip(y))
            .map(|((p, q), (a, b))| (p - q) * (a - b))
            .sum()
    }
}

pub fn radial_power_drift(
    terms: Vec<PowerTerm>,
    d: usize,
    label: impl Into<String>,
) -> Result<DriftField> {
    if d < 1 {
        return domain("dimension must be at least 1");
    }
    if let Some(t) = terms
        .iter()
        .find(|t| !t.coef.is_finite() || !(t.power >= 0.0))
    {
        return domain(format!("invalid drift term {t:?}"));
    }
    Ok(DriftField {
        kind: DriftKind::RadialPower(terms),
        dim: d,
        label: label.into(),
        claimed_condition: None,
    })
}

/// Parses `"c:q, c:q, ..."` into terms of `b(x) = -Σ c |x|^q x`.
pub fn parse_power_terms(text: &str) -> Result<Vec<PowerTerm>> {
    let mut terms = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (c, q) = item.split_once(':').ok_or_else(|| {
            crate::Error::Domain(format!("drift term `{item}` is not of the form c:q"))
        })?;
        let coef = c
            .trim()
            .parse::<f64>()
            .map_err(|e| crate::Error::Domain(format!("`{c}`: {e}")))?;
        let power = q
            .trim()
            .parse::<f64>()
            .map_err(|e| crate::Error::Domain(format!("`{q}`: {e}")))?;
        terms.push(PowerTerm { coef, power });
    }
    if terms.is_empty() {
        return domain("empty drift term list");
    }
    Ok(terms)
}

/// `b = ∇V` for `V(x) = -|x|^{2β}`, i.e. `b(x) = -2β |x|^{2β-2} x`, claiming
/// `K2 = β 2^{4-3β}`, `θ = 2β` and the default `K1 = L0 = 1`.
pub fn stable_potential_drift(beta: f64, d: usize) -> Result<DriftField> {
    if !(beta > 1.0) || !beta.is_finite() {
        return domain(format!("beta must exceed 1, got {beta}"));
    }
    let cond = DriftCondition::new(1.0, beta * 2f64.powf(4.0 - 3.0 * beta), 1.0, 2.0 * beta)?;
    Ok(radial_power_drift(
        vec![PowerTerm {
            coef: 2.0 * beta,
            power: 2.0 * beta - 2.0,
        }],
        d,
        format!("stable_potential(beta={beta})"),
    )?
    .with_condition(cond))
}

/// `b(x) = -κ x`, uniformly dissipative with constant `κ`.
pub fn linear_drift(kappa: f64, d: usize) -> Result<DriftField> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return domain(format!("kappa must be positive, got {kappa}"));
    }
    let cond = DriftCondition::new(kappa, kappa, 1.0, 2.0)?;
    Ok(radial_power_drift(
        vec![PowerTerm {
            coef: kappa,
            power: 0.0,
        }],
        d,
        format!("linear(kappa={kappa})"),
    )?
    .with_condition(cond))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityReport {
    pub probes: usize,
    pub violations: usize,
    /// Largest `<b(x)-b(y), x-y> - bound(|x-y|)`; positive means violated.
    pub worst_margin: f64,
    pub witness: (Vec<f64>, Vec<f64>),
}

/// Random-probe check of the drift condition. Pairs are uniform in the ball
/// of `radius`; every fourth probe is instead placed in the band
/// `|x-y| ∈ [0.9 L0, 1.1 L0]` to stress the regime switch.
pub fn verify_dissipativity<R: Rng + ?Sized>(
    field: &DriftField,
    cond: &DriftCondition,
    n_probes: usize,
    radius: f64,
    rng: &mut R,
) -> Result<DissipativityReport> {
    if n_probes < 1 {
        return domain("need at least one probe");
    }
    if !(radius > 0.0) {
        return domain(format!("probe radius must be positive, got {radius}"));
    }
    let d = field.dim;
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut dir = vec![0.0; d];
    let mut report = DissipativityReport {
        probes: n_probes,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
        witness: (x.clone(), y.clone()),
    };
    for i in 0..n_probes {
        sample_in_ball(radius, rng, &mut x);
        if i % 4 == 3 {
            let s = cond.l0 * rng.random_range(0.9..=1.1);
            sample_unit_direction(rng, &mut dir);
            for k in 0..d {
                y[k] = x[k] + s * dir[k];
            }
        } else {
            sample_in_ball(radius, rng, &mut y);
        }
        let r = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let bound = cond.bound(r);
        let margin = field.monotonicity(&x, &y) - bound;
        // Equality cases (e.g. linear drift with K2 = κ) must survive rounding.
        if margin > 1e-12 * (1.0 + bound.abs()) {
            report.violations += 1;
        }
        if margin > report.worst_margin {
            report.worst_margin = margin;
            report.witness = (x.clone(), y.clone());
        }
    }
    Ok(report)
}

/// Outcome of the small-index gate; vacuous (infinite margin) for `α > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateCheck {
    pub passed: bool,
    pub margin: f64,
}

/// `α C_{d,α} ω_d 3^{α-1} / (8 (2-α) d) - K1 L0^α`, required positive for `α <= 1`.
pub fn small_alpha_gate_margin(spec: &StableSpec, cond: &DriftCondition) -> f64 {
    let alpha = spec.alpha();
    alpha * spec.c_dalpha() * spec.omega_d() * 3f64.powf(alpha - 1.0)
        / (8.0 * (2.0 - alpha) * spec.d() as f64)
        - cond.k1 * cond.l0.powf(alpha)
}

pub fn check_small_alpha_gate(spec: &StableSpec, cond: &DriftCondition) -> GateCheck {
    if spec.alpha() > 1.0 {
        return GateCheck {
            passed: true,
            margin: f64::INFINITY,
        };
    }
    let margin = small_alpha_gate_margin(spec, cond);
    GateCheck {
        passed: margin > 0.0,
        margin,
    }
}

/// Largest `|b(x) - b(y)|` over random pairs with `|x - y| <= eps` in the ball.
pub fn continuity_probe<R: Rng + ?Sized>(
    field: &DriftField,
    n: usize,
    radius: f64,
    eps: f64,
    rng: &mut R,
) -> f64 {
    let d = field.dim;
    let mut x = vec![0.0; d];
    let mut dir = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        sample_in_ball(radius, rng, &mut x);
        sample_unit_direction(rng, &mut dir);
        let y: Vec<f64> = x
            .iter()
            .zip(&dir)
            .map(|(a, e)| a + eps * rng.random::<f64>() * e)
            .collect();
        let bx = field.evaluate(&x);
        let by = field.evaluate(&y);
        let gap = bx
            .iter()
            .zip(&by)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(gap);
    }
    worst
}
