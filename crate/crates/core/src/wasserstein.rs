//! Empirical `W_p` distances between equal-size samples.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};

/// Largest sample size accepted by [`exact_empirical_wp`].
pub const SIZE_CAP: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.len(),
            None => return domain("empirical measure needs at least one point"),
        };
        if dim == 0 {
            return domain("points must have positive dimension");
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::SizeMismatch {
                    left: p.len(),
                    right: dim,
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return domain("points must be finite");
            }
        }
        Ok(Self { points, dim })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return domain(format!("p must be >= 1, got {p}"));
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `(mean |x - y|^p)^{1/p}` over coupled pairs, with a delta-method standard error.
pub fn coupling_wp_upper(pairs: &[(Vec<f64>, Vec<f64>)], p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    if pairs.is_empty() {
        return domain("need at least one pair");
    }
    let (mean, se) = crate::diagnostics::mean_and_se(pairs.iter().map(|(x, y)| dist(x, y).powf(p)));
    if mean == 0.0 {
        return Ok((0.0, 0.0));
    }
    let value = mean.powf(1.0 / p);
    Ok((value, value / (p * mean) * se))
}

/// Optimal assignment for a square cost matrix (row-major), by shortest
/// augmenting paths with dual potentials. Returns `col[row]`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        col[row_of[j] - 1] = j - 1;
    }
    col
}

fn checked_sizes(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<usize> {
    if mu.n() != nu.n() {
        return Err(Error::SizeMismatch {
            left: mu.n(),
            right: nu.n(),
        });
    }
    if mu.dim() != nu.dim() {
        return Err(Error::SizeMismatch {
            left: mu.dim(),
            right: nu.dim(),
        });
    }
    if mu.n() > SIZE_CAP {
        return Err(Error::SizeCap {
            n: mu.n(),
            cap: SIZE_CAP,
        });
    }
    Ok(mu.n())
}

// Cost of a matching, summed in the order of the first sample.
fn matching_wp(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, col: &[usize], p: f64) -> f64 {
    let total: f64 = col
        .iter()
        .enumerate()
        .map(|(i, &j)| dist(&mu.points[i], &nu.points[j]).powf(p))
        .sum();
    (total / col.len() as f64).powf(1.0 / p)
}

fn assignment_matching(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<Vec<usize>> {
    check_p(p)?;
    let n = checked_sizes(mu, nu)?;
    let cost: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            nu.points
                .iter()
                .map(move |y| dist(&mu.points[i], y).powf(p))
        })
        .collect();
    Ok(solve_assignment(&cost, n))
}

/// Exact `W_p` between two empirical measures through the assignment solver.
pub fn assignment_wp(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    let col = assignment_matching(mu, nu, p)?;
    Ok(matching_wp(mu, nu, &col, p))
}

fn sorted_matching(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<Vec<usize>> {
    check_p(p)?;
    let n = checked_sizes(mu, nu)?;
    if mu.dim() != 1 {
        return domain("sorting solution needs one-dimensional samples");
    }
    let order = |m: &EmpiricalMeasure| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| m.points[a][0].total_cmp(&m.points[b][0]));
        idx
    };
    let (om, on) = (order(mu), order(nu));
    let mut col = vec![0; n];
    for (a, b) in om.into_iter().zip(on) {
        col[a] = b;
    }
    Ok(col)
}

/// Exact `W_p` in one dimension by pairing order statistics.
pub fn sorted_wp(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    let col = sorted_matching(mu, nu, p)?;
    Ok(matching_wp(mu, nu, &col, p))
}

/// Exact empirical `W_p`; one-dimensional samples use the sorting solution.
pub fn exact_empirical_wp(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if mu.dim() == 1 && nu.dim() == 1 {
        sorted_wp(mu, nu, p)
    } else {
        assignment_wp(mu, nu, p)
    }
}

/// Exact empirical `W_p` with a delta-method standard error taken from the
/// spread of the optimal matching costs.
pub fn exact_empirical_wp_with_se(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    p: f64,
) -> Result<(f64, f64)> {
    let col = if mu.dim() == 1 && nu.dim() == 1 {
        sorted_matching(mu, nu, p)?
    } else {
        assignment_matching(mu, nu, p)?
    };
    let value = matching_wp(mu, nu, &col, p);
    let costs = col
        .iter()
        .enumerate()
        .map(|(i, &j)| dist(&mu.points[i], &nu.points[j]).powf(p));
    let (mean, se) = crate::diagnostics::mean_and_se(costs);
    if mean == 0.0 {
        return Ok((value, 0.0));
    }
    Ok((value, value / (p * mean) * se))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub lambda_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the fitted slope.
    pub std_err: f64,
}

/// Weighted least squares of `log(value)` on `t`, weights `(value / std_err)²`.
/// Zero standard errors are raised to the smallest positive relative error.
pub fn contraction_rate_fit(series: &[(f64, f64, f64)]) -> Result<RateFit> {
    if series.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 points, got {}",
            series.len()
        )));
    }
    if let Some(&(t, v, _)) = series.iter().find(|s| !(s.1 > 0.0) || !s.1.is_finite()) {
        return Err(Error::DegenerateFit(format!(
            "non-positive value {v} at t = {t}"
        )));
    }
    let rel: Vec<f64> = series.iter().map(|&(_, v, se)| (se / v).abs()).collect();
    let floor = rel
        .iter()
        .copied()
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = rel
        .iter()
        .map(|&r| {
            if floor.is_infinite() {
                1.0
            } else {
                1.0 / r.max(floor).powi(2)
            }
        })
        .collect();
    let sw: f64 = weights.iter().sum();
    let tbar = series
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * s.0)
        .sum::<f64>()
        / sw;
    let ybar = series
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * s.1.ln())
        .sum::<f64>()
        / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (s, w) in series.iter().zip(&weights) {
        let dx = s.0 - tbar;
        let dy = s.1.ln() - ybar;
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all times coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * tbar;
    let sse = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let s2 = sse / (series.len() - 2) as f64;
    Ok(RateFit {
        lambda_hat: -slope,
        intercept,
        r_squared,
        std_err: (s2 / sxx).sqrt(),
    })
}

/// Longest prefix of the series with positive values.
pub fn positive_prefix(series: &[(f64, f64, f64)]) -> &[(f64, f64, f64)] {
    let end = series
        .iter()
        .position(|s| !(s.1 > 0.0))
        .unwrap_or(series.len());
    &series[..end]
}
