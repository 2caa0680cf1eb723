//! Reordering weights, the finite-n measure change and its Brownian limit.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::degree_law::{size_biased, CriticalParams, JointDegreeLaw};
use crate::error::{Error, Result};
use crate::limit::llt::{exact_joint_pmf, prob_balanced_with_min_positive, JointPmf};
use crate::numerics::{mean_and_se, CompensatedSum};
use crate::rng::{derive_rng, tag};

/// Default exponent slack in the admissibility condition on prefixes.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Grid size limit for the exact convolutions used here.
pub const EXACT_WINDOW: usize = 1 << 24;

/// Weight turning i.i.d. size-biased draws into the discovery order of the
/// `r` vertices of positive in-degree, given there are exactly `r` of them.
pub fn psi_r(degrees: &[(u32, u32)], mu: f64, p: f64) -> Result<f64> {
    if degrees.iter().any(|&(k, _)| k == 0) {
        return Err(Error::Precondition("reorder weight needs positive in-degrees".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::ProbabilityOutOfRange {
            value: p,
            context: "P(D- > 0)".into(),
        });
    }
    let r = degrees.len();
    let mut tail: u64 = degrees.iter().map(|&(k, _)| k as u64).sum();
    let mut w = 1.0;
    for (i, &(k, _)) in degrees.iter().enumerate() {
        w *= (r - i) as f64 * mu / (tail as f64 * p);
        tail -= k as u64;
    }
    Ok(w)
}

/// `E[u(Z_1..Z_r) psi_r(Z_1..Z_r)]` by summation over all `r`-tuples of atoms
/// of the size-biased law.
pub fn reorder_expectation(law: &JointDegreeLaw, r: usize, u: impl Fn(&[(u32, u32)]) -> f64) -> Result<f64> {
    let z = size_biased(law)?;
    let atoms: Vec<((u32, u32), f64)> = z
        .atoms()
        .iter()
        .filter(|a| a.prob > 0.0)
        .map(|a| ((a.k_in, a.k_out), a.prob))
        .collect();
    let mu = law.mean_in();
    let p = law.positive_in_prob();
    let mut acc = CompensatedSum::new();
    let mut idx = vec![0usize; r];
    let mut tuple = vec![(0u32, 0u32); r];
    loop {
        let mut prob = 1.0;
        for (t, &i) in idx.iter().enumerate() {
            tuple[t] = atoms[i].0;
            prob *= atoms[i].1;
        }
        acc.add(prob * psi_r(&tuple, mu, p)? * u(&tuple));
        // odometer increment
        let mut t = 0;
        while t < r {
            idx[t] += 1;
            if idx[t] < atoms.len() {
                break;
            }
            idx[t] = 0;
            t += 1;
        }
        if t == r {
            break;
        }
    }
    Ok(acc.value())
}

/// A measure-change weight, with a standard error when it was estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureChangeValue {
    pub value: f64,
    pub mc_std_error: Option<f64>,
}

fn check_prefix(prefix: &[(u32, u32)], n: usize) -> Result<()> {
    if prefix.len() > n {
        return Err(Error::Precondition(format!("prefix length {} exceeds n = {n}", prefix.len())));
    }
    if prefix.iter().any(|&(k, _)| k == 0) {
        return Err(Error::Precondition("prefix entries need positive in-degree".into()));
    }
    Ok(())
}

/// The product weight `prod_i (n - i + 1) mu / (sum_{j >= i} k_j- + xi)`
/// and the target value of `Delta_{n-m}` for a prefix.
fn prefix_weight(prefix: &[(u32, u32)], n: usize, mu: f64, xi: u64) -> f64 {
    let mut tail: u64 = prefix.iter().map(|&(k, _)| k as u64).sum::<u64>() + xi;
    let mut w = 1.0;
    for (i, &(k, _)) in prefix.iter().enumerate() {
        w *= (n - i) as f64 * mu / tail as f64;
        tail -= k as u64;
    }
    w
}

fn prefix_target(prefix: &[(u32, u32)]) -> i64 {
    prefix.iter().map(|&(a, b)| b as i64 - a as i64).sum()
}

/// Exact evaluation of the measure change for laws with finite support.
///
/// Holds the joint law of `(Delta_{n-m}, Xi^-_{n-m})` and the normaliser
/// `P(R_n >= m, Delta_n = 0)` so that many prefixes can be evaluated cheaply.
#[derive(Debug, Clone)]
pub struct MeasureChange {
    n: usize,
    m: usize,
    mu: f64,
    rest: JointPmf,
    normalizer: f64,
}

impl MeasureChange {
    pub fn new(law: &JointDegreeLaw, n: usize, m: usize) -> Result<Self> {
        if m > n {
            return Err(Error::Precondition(format!("m = {m} exceeds n = {n}")));
        }
        let normalizer = prob_balanced_with_min_positive(law, n, m, EXACT_WINDOW)?;
        if normalizer <= 0.0 {
            return Err(Error::ZeroNormalizer);
        }
        Ok(MeasureChange {
            n,
            m,
            mu: law.mean_in(),
            rest: exact_joint_pmf(law, n - m, EXACT_WINDOW)?,
            normalizer,
        })
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn phi(&self, prefix: &[(u32, u32)]) -> Result<f64> {
        check_prefix(prefix, self.n)?;
        if prefix.len() != self.m {
            return Err(Error::Precondition(format!(
                "prefix length {} differs from m = {}",
                prefix.len(),
                self.m
            )));
        }
        let Some(row) = self.rest.row(prefix_target(prefix)) else {
            return Ok(0.0);
        };
        let mut acc = CompensatedSum::new();
        for (xi, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc.add(p * prefix_weight(prefix, self.n, self.mu, xi as u64));
            }
        }
        Ok(acc.value() / self.normalizer)
    }
}

/// Monte Carlo estimate of the measure change at a prefix: the expectation over
/// `n - m` fresh degree pairs is sampled, the normaliser is exact.
pub fn phi_nm_estimate(
    law: &JointDegreeLaw,
    prefix: &[(u32, u32)],
    n: usize,
    mc_budget: usize,
    seed: u64,
) -> Result<MeasureChangeValue> {
    check_prefix(prefix, n)?;
    if mc_budget < 2 {
        return Err(Error::BudgetTooSmall(format!("{mc_budget} draws")));
    }
    let m = prefix.len();
    let normalizer = prob_balanced_with_min_positive(law, n, m, EXACT_WINDOW)?;
    if normalizer <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    let target = prefix_target(prefix);
    let mu = law.mean_in();
    let sampler = law.sampler();
    let mut rng = derive_rng(seed, &[tag::RUN]);
    let mut hits = 0usize;
    let draws: Vec<f64> = (0..mc_budget)
        .map(|_| {
            let mut delta = 0i64;
            let mut xi = 0u64;
            for _ in 0..n - m {
                let (a, b) = sampler.sample(&mut rng);
                delta += a as i64 - b as i64;
                xi += a as u64;
            }
            if delta == target {
                hits += 1;
                prefix_weight(prefix, n, mu, xi) / normalizer
            } else {
                0.0
            }
        })
        .collect();
    if hits == 0 && n > m {
        return Err(Error::BudgetTooSmall(format!(
            "no draw out of {mc_budget} hit Delta_{{n-m}} = {target}"
        )));
    }
    let (value, se) = mean_and_se(&draws);
    Ok(MeasureChangeValue {
        value,
        mc_std_error: Some(se),
    })
}

/// The law of `D-` under the exponential tilt `exp(-theta D- - alpha(theta))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedModel {
    pub theta: f64,
    pub alpha: f64,
    pub mean_in: f64,
    pub mean_out: f64,
    /// Law of `D+` given `D- = 0`, as `(k, probability)`.
    pub zero_in_out_law: Vec<(u32, f64)>,
    /// Third-order small-`theta` expansion of `alpha`.
    pub alpha_series: f64,
    /// First-order expansions of the tilted means.
    pub mean_in_series: f64,
    pub mean_out_series: f64,
}

pub fn tilted_expansion(law: &JointDegreeLaw, theta: f64) -> Result<TiltedModel> {
    if !(theta >= 0.0) {
        return Err(Error::Precondition(format!("tilt {theta} must be nonnegative")));
    }
    let mut z = CompensatedSum::new();
    let mut zin = CompensatedSum::new();
    let mut zout = CompensatedSum::new();
    let mut zero_mass = 0.0;
    let mut zero_in: Vec<(u32, f64)> = Vec::new();
    for a in law.atoms() {
        let w = a.prob * (-theta * a.k_in as f64).exp();
        z.add(w);
        zin.add(w * a.k_in as f64);
        zout.add(w * a.k_out as f64);
        if a.k_in == 0 && a.prob > 0.0 {
            zero_mass += a.prob;
            zero_in.push((a.k_out, a.prob));
        }
    }
    for e in &mut zero_in {
        e.1 /= zero_mass;
    }
    let norm = z.value();
    let mu = law.mean_in();
    let var_in = law.moment(2, 0) - mu * mu;
    let third = law.moment(3, 0) - 3.0 * mu * law.moment(2, 0) + 2.0 * mu.powi(3);
    let cov = law.moment(1, 1) - mu * law.mean_out();
    Ok(TiltedModel {
        theta,
        alpha: norm.ln(),
        mean_in: zin.value() / norm,
        mean_out: zout.value() / norm,
        zero_in_out_law: zero_in,
        alpha_series: -mu * theta + 0.5 * var_in * theta * theta - third * theta.powi(3) / 6.0,
        mean_in_series: mu - var_in * theta,
        mean_out_series: law.mean_out() - cov * theta,
    })
}

/// Means of the size-biased pair, `(E[Z-], E[Z+])`.
pub fn size_biased_means(law: &JointDegreeLaw) -> (f64, f64) {
    let mu = law.mean_in();
    (law.moment(2, 0) / mu, law.moment(1, 1) / mu)
}

/// Whether the centred prefix walks stay within `m^{1/2 + eps}`.
pub fn prefix_is_admissible(prefix: &[(u32, u32)], lambdas: (f64, f64), eps: f64) -> bool {
    let bound = (prefix.len() as f64).powf(0.5 + eps);
    let (mut sm, mut sp) = (0.0f64, 0.0f64);
    for &(a, b) in prefix {
        sm += a as f64 - lambdas.0;
        sp += b as f64 - lambdas.1;
        if sm.abs() > bound || sp.abs() > bound {
            return false;
        }
    }
    true
}

/// Asymptotic lower bound for the measure change at an admissible prefix:
/// `exp((1/(mu n)) sum_{i=0}^m (s-(i) - s-(m)) - sigma_-^2 m^3 / (6 mu^2 n^2))`.
pub fn gamma_lower_bound(law: &JointDegreeLaw, prefix: &[(u32, u32)], n: usize, eps: f64) -> Result<f64> {
    let lambdas = size_biased_means(law);
    if !prefix_is_admissible(prefix, lambdas, eps) {
        return Err(Error::Precondition("prefix violates the admissibility bound".into()));
    }
    let params = crate::degree_law::compute_params(law)?;
    let m = prefix.len();
    if m == 0 {
        return Ok(1.0);
    }
    let mut s = Vec::with_capacity(m + 1);
    s.push(0.0);
    let mut acc = 0.0;
    for &(a, _) in prefix {
        acc += a as f64 - lambdas.0;
        s.push(acc);
    }
    let last = s[m];
    let sum: f64 = s.iter().map(|x| x - last).sum();
    let nf = n as f64;
    let mu = params.mu;
    let sm = params.sigma_minus;
    Ok((sum / (mu * nf) - sm * sm * (m as f64).powi(3) / (6.0 * mu * mu * nf * nf)).exp())
}

/// One draw of `exp(-(s_-/mu) int_0^T t dW_t - s_-^2 T^3 / (6 mu^2))`, the
/// stochastic integral realised as a left-point sum on a grid of step `dt`.
pub fn phi_limit_sample(params: &CriticalParams, horizon: f64, dt: f64, seed: u64) -> f64 {
    let mut rng = derive_rng(seed, &[tag::PATH]);
    phi_limit_sample_with(params, horizon, dt, &mut rng)
}

pub fn phi_limit_sample_with<R: Rng + ?Sized>(params: &CriticalParams, horizon: f64, dt: f64, rng: &mut R) -> f64 {
    let c = params.sigma_minus / params.mu;
    if c == 0.0 {
        return 1.0;
    }
    let steps = (horizon / dt).round() as usize;
    let sd = dt.sqrt();
    let mut integral = 0.0;
    for i in 0..steps {
        let z: f64 = StandardNormal.sample(rng);
        integral += i as f64 * dt * sd * z;
    }
    (-c * integral - c * c * horizon.powi(3) / 6.0).exp()
}
