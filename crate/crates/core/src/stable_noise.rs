//! Isotropic α-stable noise: Lévy-measure constants, the jump-size
//! decomposition at a truncation radius, and exact/compound-Poisson samplers.
//!
//! The Lévy measure is `C_{d,α} |z|^{-d-α} dz`, normalized so that the process
//! has characteristic function `exp(-t |ξ|^α)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{domain, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("stability index must lie in (0, 2), got {alpha}"));
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if d < 1 {
        return domain("dimension must be at least 1");
    }
    Ok(())
}

/// `C_{d,α} = 2^α Γ((d+α)/2) π^{-d/2} / |Γ(-α/2)|`, evaluated in log space.
///
/// `|Γ(-α/2)| = Γ(1-α/2) · 2/α` keeps every gamma argument positive.
pub fn levy_constant(d: usize, alpha: f64) -> Result<f64> {
    check_dim(d)?;
    check_alpha(alpha)?;
    let d = d as f64;
    let log_abs_gamma_neg = libm::lgamma(1.0 - 0.5 * alpha) + (2.0 / alpha).ln();
    let log_c = alpha * std::f64::consts::LN_2 + libm::lgamma(0.5 * (d + alpha))
        - 0.5 * d * PI.ln()
        - log_abs_gamma_neg;
    Ok(log_c.exp())
}

/// Surface measure of the unit sphere in `R^d`: `2 π^{d/2} / Γ(d/2)`.
pub fn sphere_surface(d: usize) -> Result<f64> {
    check_dim(d)?;
    let d = d as f64;
    Ok((std::f64::consts::LN_2 + 0.5 * d * PI.ln() - libm::lgamma(0.5 * d)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSpec {
    d: usize,
    alpha: f64,
    c_dalpha: f64,
    omega_d: f64,
}

impl StableSpec {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        Ok(Self {
            d,
            alpha,
            c_dalpha: levy_constant(d, alpha)?,
            omega_d: sphere_surface(d)?,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_dalpha(&self) -> f64 {
        self.c_dalpha
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    /// Intensity of jumps with `|z| > delta`.
    pub fn rate_above(&self, delta: f64) -> f64 {
        self.c_dalpha * self.omega_d * delta.powf(-self.alpha) / self.alpha
    }

    /// Per-coordinate variance of jumps with `|z| <= delta`.
    pub fn small_var_per_coord(&self, delta: f64) -> f64 {
        self.c_dalpha * self.omega_d * delta.powf(2.0 - self.alpha)
            / (self.d as f64 * (2.0 - self.alpha))
    }
}

/// Split of the Lévy measure at radius `delta`: a compound Poisson part above
/// and a variance budget below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDecomposition {
    pub d: usize,
    pub alpha: f64,
    pub delta: f64,
    pub rate_above: f64,
    pub small_var_per_coord: f64,
}

pub fn decompose(spec: &StableSpec, delta: f64) -> Result<JumpDecomposition> {
    if !(delta > 0.0) || !delta.is_finite() {
        return domain(format!("truncation radius must be positive, got {delta}"));
    }
    Ok(JumpDecomposition {
        d: spec.d,
        alpha: spec.alpha,
        delta,
        rate_above: spec.rate_above(delta),
        small_var_per_coord: spec.small_var_per_coord(delta),
    })
}

impl JumpDecomposition {
    /// Inverse CDF of the jump radius: `P(R > s) = (δ/s)^α`, `u ∈ (0, 1]`.
    pub fn pareto_radius(&self, u: f64) -> f64 {
        self.delta * u.powf(-1.0 / self.alpha)
    }

    pub fn sample_large_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z = vec![0.0; self.d];
        self.sample_large_jump_into(rng, &mut z);
        z
    }

    pub fn sample_large_jump_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let u = 1.0 - rng.random::<f64>();
        let radius = self.pareto_radius(u);
        sample_unit_direction(rng, out);
        out.iter_mut().for_each(|c| *c *= radius);
    }
}

/// Uniform point on the unit sphere (normalized Gaussian; a random sign in 1-D).
pub fn sample_unit_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut norm2 = 0.0;
        for c in out.iter_mut() {
            *c = StandardNormal.sample(rng);
            norm2 += *c * *c;
        }
        if norm2 > 1e-300 {
            let inv = norm2.sqrt().recip();
            out.iter_mut().for_each(|c| *c *= inv);
            return;
        }
    }
}

/// Jump with radius Pareto-distributed on `(inner, outer]` under the stable
/// radial law, isotropic direction. Used to probe reflection invariance of
/// the measure restricted to an annulus.
pub fn sample_jump_in_band<R: Rng + ?Sized>(
    alpha: f64,
    inner: f64,
    outer: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    let tail = (inner / outer).powf(alpha);
    let u: f64 = rng.random();
    // P(R > s | inner < R <= outer) inverted.
    let survival = 1.0 - u * (1.0 - tail);
    let radius = inner * survival.powf(-1.0 / alpha);
    sample_unit_direction(rng, out);
    out.iter_mut().for_each(|c| *c *= radius);
}

/// Positive strictly `rho`-stable variable (`0 < rho < 1`) with Laplace
/// transform `exp(-u^rho)`, via the Chambers–Mallows–Stuck / Kanter
/// representation.
pub fn sample_positive_stable<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> f64 {
    loop {
        let u = PI * rng.random::<f64>();
        let w: f64 = Exp1.sample(rng);
        if u <= 0.0 || w <= 0.0 {
            continue;
        }
        let a = (rho * u).sin() / u.sin().powf(1.0 / rho);
        let b = (((1.0 - rho) * u).sin() / w).powf((1.0 - rho) / rho);
        let s = a * b;
        if s.is_finite() && s > 0.0 {
            return s;
        }
    }
}

/// Exact increment `Z_t` of the isotropic α-stable process by Gaussian
/// subordination: `Z_t = sqrt(2 S) N` with `E exp(-u S) = exp(-t u^{α/2})`.
pub fn sample_increment<R: Rng + ?Sized>(
    spec: &StableSpec,
    t: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("time increment must be positive, got {t}"));
    }
    let mut out = vec![0.0; spec.d];
    sample_increment_into(spec, t, rng, &mut out);
    Ok(out)
}

pub(crate) fn sample_increment_into<R: Rng + ?Sized>(
    spec: &StableSpec,
    t: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    let rho = 0.5 * spec.alpha;
    let s = t.powf(1.0 / rho) * sample_positive_stable(rho, rng);
    let scale = (2.0 * s).sqrt();
    for c in out.iter_mut() {
        let n: f64 = StandardNormal.sample(rng);
        *c = scale * n;
    }
}
