//! Goodness-of-fit tools for cross-checking the samplers against each other
//! and against the closed-form law.

use crate::error::{invalid, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::digamma;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// `1/2 sum |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(crate::Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Counts of `x` in the bins `[edges[i], edges[i+1])`; values outside are dropped.
pub fn histogram(x: &[f64], edges: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; edges.len().saturating_sub(1)];
    for &v in x {
        if v < edges[0] || v >= edges[edges.len() - 1] {
            continue;
        }
        let i = edges.partition_point(|&e| e <= v) - 1;
        counts[i] += 1;
    }
    counts
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestOutcome> {
    if x.is_empty() {
        return Err(invalid("KS test needs samples"));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(TestOutcome { statistic: d, p_value: ks_p_value(d, n) })
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS test needs samples"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(TestOutcome { statistic: d, p_value: ks_p_value(d, n_eff) })
}

/// Two-sample energy-distance permutation test on points in the plane.
///
/// At most `max_each` points are taken from each sample (evenly strided),
/// since the test costs `O(n^2)` per permutation.
pub fn energy_test(
    a: &[[f64; 2]],
    b: &[[f64; 2]],
    n_perm: usize,
    max_each: usize,
    seed: u64,
) -> Result<TestOutcome> {
    if a.len() < 2 || b.len() < 2 || n_perm == 0 {
        return Err(invalid("energy test needs >= 2 points per sample and >= 1 permutation"));
    }
    let take = |v: &[[f64; 2]]| -> Vec<[f64; 2]> {
        let n = v.len().min(max_each);
        (0..n).map(|i| v[i * v.len() / n]).collect()
    };
    let mut pooled = take(a);
    let na = pooled.len();
    pooled.extend(take(b));
    let n = pooled.len();
    let dist: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (p, q) = (pooled[k / n], pooled[k % n]);
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
        })
        .collect();
    let stat = |labels: &[bool]| -> f64 {
        let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                match (labels[i], labels[j]) {
                    (true, true) => xx += d,
                    (false, false) => yy += d,
                    _ => xy += d,
                }
            }
        }
        let (fa, fb) = (na as f64, (n - na) as f64);
        // xy counts every cross pair twice.
        xy / (fa * fb) - xx / (fa * fa) - yy / (fb * fb)
    };
    let labels: Vec<bool> = (0..n).map(|i| i < na).collect();
    let observed = stat(&labels);
    let exceed: usize = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut l = labels.clone();
            l.shuffle(&mut rng);
            usize::from(stat(&l) >= observed)
        })
        .sum();
    Ok(TestOutcome { statistic: observed, p_value: (exceed + 1) as f64 / (n_perm + 1) as f64 })
}

/// Kozachenko-Leonenko k-nearest-neighbour estimate of differential
/// entropy (nats) for points in the plane.
pub fn knn_entropy(points: &[[f64; 2]], k: usize) -> Result<f64> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(invalid("knn_entropy needs more points than neighbours"));
    }
    let log_eps: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points[i];
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            0.5 * kth.max(f64::MIN_POSITIVE).ln()
        })
        .sum();
    let nf = n as f64;
    Ok(digamma(nf) - digamma(k as f64) + std::f64::consts::PI.ln() + 2.0 * log_eps / nf)
}
