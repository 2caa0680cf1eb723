//! Two-sample tests used by the experiments and the test suites.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Kolmogorov-Smirnov distance between the empirical CDFs of `a` and `b`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic 1 - alpha critical value of the two-sample KS distance.
pub fn ks_critical(na: usize, nb: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square homogeneity test on category counts. Categories
/// with fewer than `min_count` pooled observations are merged into one bin.
pub fn chi_square_two_sample<K: Eq + Hash + Clone + Ord>(
    a: &HashMap<K, u64>,
    b: &HashMap<K, u64>,
    min_count: u64,
) -> Result<ChiSquareResult> {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    if na == 0 || nb == 0 {
        return Err(Error::EmptySample);
    }
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let mut rest = (0u64, 0u64);
    for k in keys {
        let x = a.get(k).copied().unwrap_or(0);
        let y = b.get(k).copied().unwrap_or(0);
        if x + y < min_count {
            rest.0 += x;
            rest.1 += y;
        } else {
            bins.push((x, y));
        }
    }
    if rest.0 + rest.1 > 0 {
        bins.push(rest);
    }
    chi_square_from_bins(&bins, na, nb)
}

fn chi_square_from_bins(bins: &[(u64, u64)], na: u64, nb: u64) -> Result<ChiSquareResult> {
    if bins.len() < 2 {
        return Ok(ChiSquareResult {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        });
    }
    let ra = (nb as f64 / na as f64).sqrt();
    let rb = (na as f64 / nb as f64).sqrt();
    let statistic: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let d = ra * x as f64 - rb * y as f64;
            d * d / (x + y) as f64
        })
        .sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|_| Error::Degenerate)?;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// Goodness-of-fit test of observed counts against expected probabilities.
pub fn chi_square_goodness_of_fit(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let statistic: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = observed.len().saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|_| Error::Degenerate)?;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}
