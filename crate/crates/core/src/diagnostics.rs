//! Statistical checks used to validate samplers and simulated ensembles:
//! empirical characteristic functions, the Kolmogorov–Smirnov statistic and
//! a permutation energy-distance two-sample test.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::rng::stream;

/// Empirical characteristic function at one frequency with CLT standard errors
/// of its real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalCf {
    pub re: f64,
    pub im: f64,
    pub se_re: f64,
    pub se_im: f64,
}

pub fn empirical_cf<V: AsRef<[f64]>>(samples: &[V], xi: &[f64]) -> EmpiricalCf {
    let n = samples.len() as f64;
    let (mut sc, mut ss, mut sc2, mut ss2) = (0.0, 0.0, 0.0, 0.0);
    for x in samples {
        let phase: f64 = x.as_ref().iter().zip(xi).map(|(a, b)| a * b).sum();
        let (s, c) = phase.sin_cos();
        sc += c;
        ss += s;
        sc2 += c * c;
        ss2 += s * s;
    }
    let re = sc / n;
    let im = ss / n;
    let var_re = ((sc2 / n - re * re) * n / (n - 1.0)).max(0.0);
    let var_im = ((ss2 / n - im * im) * n / (n - 1.0)).max(0.0);
    EmpiricalCf {
        re,
        im,
        se_re: (var_re / n).sqrt(),
        se_im: (var_im / n).sqrt(),
    }
}

/// `sup |F_n - F|` for a one-dimensional sample.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        acc.max(lo).max(hi)
    })
}

/// Asymptotic Kolmogorov p-value `P(K > sqrt(n) D)`.
pub fn kolmogorov_pvalue(n: usize, d: f64) -> f64 {
    let x = (n as f64).sqrt() * d;
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTest {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

// Sums of pairwise distances within group A, within group B and across,
// where `labels[i]` marks membership in A.
fn group_sums(pooled: &[Vec<f64>], labels: &[bool]) -> (f64, f64, f64) {
    let n = pooled.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
            for j in (i + 1)..n {
                let dij = dist(&pooled[i], &pooled[j]);
                match (labels[i], labels[j]) {
                    (true, true) => aa += dij,
                    (false, false) => bb += dij,
                    _ => ab += dij,
                }
            }
            (aa, bb, ab)
        })
        .reduce(|| (0.0, 0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2))
}

fn energy_from_sums(n_a: usize, n_b: usize, sums: (f64, f64, f64)) -> f64 {
    let (aa, bb, ab) = sums;
    let (na, nb) = (n_a as f64, n_b as f64);
    2.0 * ab / (na * nb) - 2.0 * aa / (na * na) - 2.0 * bb / (nb * nb)
}

/// Permutation energy-distance test of equal laws for samples `a` and `b`.
/// Permutations are drawn from stream `seed` so the p-value is reproducible.
pub fn energy_distance_test(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> EnergyTest {
    let pooled: Vec<Vec<f64>> = a.iter().chain(b).cloned().collect();
    let mut labels: Vec<bool> = (0..pooled.len()).map(|i| i < a.len()).collect();
    let statistic = energy_from_sums(a.len(), b.len(), group_sums(&pooled, &labels));
    let mut rng = stream(seed, 0);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(&mut rng);
        let perm = energy_from_sums(a.len(), b.len(), group_sums(&pooled, &labels));
        if perm >= statistic {
            exceed += 1;
        }
    }
    EnergyTest {
        statistic,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        permutations,
    }
}

/// Energy test of `law(z) = law(w)` when `w[i]` is the image of `z[i]` under
/// an involution. Under the null each pair is exchangeable, so the reference
/// distribution swaps within pairs. With signs `s` the energy statistic is
/// `const + Σ_{i<j} s_i s_j K_ij`, `K_ij = |z_i-w_j| + |z_j-w_i| - |z_i-z_j| - |w_i-w_j|`;
/// the kernel is stored once in single precision.
pub fn paired_energy_test(
    z: &[Vec<f64>],
    w: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> EnergyTest {
    let n = z.len().min(w.len());
    let rows: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    (dist(&z[i], &w[j]) + dist(&z[j], &w[i])
                        - dist(&z[i], &z[j])
                        - dist(&w[i], &w[j])) as f32
                })
                .collect()
        })
        .collect();
    let form = |signs: &[f32]| -> f64 {
        rows.par_iter()
            .enumerate()
            .map(|(i, row)| {
                let inner: f32 = row.iter().zip(&signs[i + 1..]).map(|(k, s)| k * s).sum();
                f64::from(signs[i]) * f64::from(inner)
            })
            .sum()
    };
    let ones = vec![1.0f32; n];
    let statistic = form(&ones);
    let mut rng = stream(seed, 0);
    let mut signs = ones;
    let mut exceed = 0usize;
    for _ in 0..permutations {
        signs
            .iter_mut()
            .for_each(|s| *s = if rng.random_bool(0.5) { 1.0 } else { -1.0 });
        if form(&signs) >= statistic {
            exceed += 1;
        }
    }
    EnergyTest {
        statistic,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        permutations,
    }
}

/// Sample mean and CLT standard error.
pub fn mean_and_se(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    for v in values {
        n += 1.0;
        let delta = v - mean;
        mean += delta / n;
        m2 += delta * (v - mean);
    }
    if n < 2.0 {
        return (mean, 0.0);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

/// Uniform point in the centered ball of the given radius.
pub fn sample_in_ball<R: Rng + ?Sized>(radius: f64, rng: &mut R, out: &mut [f64]) {
    crate::stable_noise::sample_unit_direction(rng, out);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / out.len() as f64);
    out.iter_mut().for_each(|c| *c *= r);
}
