//! Exact convolutions of degree-difference sums and the Gaussian local limit.

use serde::{Deserialize, Serialize};

use crate::degree_law::JointDegreeLaw;
use crate::error::{Error, Result};
use crate::limit::lattice::{main_lattice, IntLattice2};
use crate::numerics::DoubleDouble;

/// A probability mass function on consecutive integers starting at `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntPmf {
    pub offset: i64,
    pub probs: Vec<f64>,
}

impl IntPmf {
    pub fn prob(&self, x: i64) -> f64 {
        let i = x - self.offset;
        if i < 0 || i as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[i as usize]
        }
    }

    pub fn total(&self) -> f64 {
        crate::numerics::compensated_sum(self.probs.iter().copied())
    }

    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.offset + i as i64, p))
    }
}

/// Joint pmf of `(Delta_n, Xi^-_n)` on a dense grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    pub delta_offset: i64,
    pub delta_len: usize,
    pub xi_len: usize,
    /// Indexed `[delta - delta_offset][xi]`, flattened delta-major.
    pub probs: Vec<f64>,
}

impl JointPmf {
    pub fn prob(&self, delta: i64, xi: u64) -> f64 {
        let d = delta - self.delta_offset;
        if d < 0 || d as usize >= self.delta_len || xi as usize >= self.xi_len {
            return 0.0;
        }
        self.probs[d as usize * self.xi_len + xi as usize]
    }

    /// Row of the grid at a fixed value of `Delta`.
    pub fn row(&self, delta: i64) -> Option<&[f64]> {
        let d = delta - self.delta_offset;
        if d < 0 || d as usize >= self.delta_len {
            return None;
        }
        let s = d as usize * self.xi_len;
        Some(&self.probs[s..s + self.xi_len])
    }
}

fn dd_to_vec(v: &[DoubleDouble]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64()).collect()
}

/// Exact law of `Delta_n = sum (D-_i - D+_i)` by iterated convolution in
/// double-double precision. `window` caps the number of grid cells.
///
/// The step law is renormalised in double-double first, so the output has
/// unit mass up to accumulation error rather than the input's rounding.
pub fn exact_sum_pmf(law: &JointDegreeLaw, n: usize, window: usize) -> Result<IntPmf> {
    let step = law.difference_pmf();
    let (lo, hi) = match (step.first(), step.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::EmptySupport),
    };
    let width = (hi - lo) as usize;
    let needed = n * width + 1;
    if needed > window {
        return Err(Error::WindowOverflow { needed, window });
    }
    let mass = step
        .iter()
        .fold(DoubleDouble::ZERO, |acc, &(_, p)| acc + DoubleDouble::from_f64(p));
    let kernel: Vec<(usize, DoubleDouble)> = step
        .iter()
        .filter(|&&(_, p)| p > 0.0)
        .map(|&(d, p)| ((d - lo) as usize, DoubleDouble::from_f64(p).div(mass)))
        .collect();
    let mut cur = vec![DoubleDouble::ZERO; needed];
    cur[0] = DoubleDouble::from_f64(1.0);
    let mut next = vec![DoubleDouble::ZERO; needed];
    for k in 0..n {
        let len = k * width + 1;
        next[..len + width].fill(DoubleDouble::ZERO);
        for (i, &c) in cur[..len].iter().enumerate() {
            if c.hi == 0.0 {
                continue;
            }
            for &(j, p) in &kernel {
                next[i + j] = next[i + j] + c * p;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(IntPmf {
        offset: n as i64 * lo,
        probs: dd_to_vec(&cur),
    })
}

/// Exact joint law of `(Delta_n, Xi^-_n)`.
pub fn exact_joint_pmf(law: &JointDegreeLaw, n: usize, window: usize) -> Result<JointPmf> {
    let atoms: Vec<_> = law.atoms().iter().filter(|a| a.prob > 0.0).collect();
    if atoms.is_empty() {
        return Err(Error::EmptySupport);
    }
    let lo = atoms.iter().map(|a| a.k_in as i64 - a.k_out as i64).min().unwrap();
    let hi = atoms.iter().map(|a| a.k_in as i64 - a.k_out as i64).max().unwrap();
    let max_in = atoms.iter().map(|a| a.k_in as usize).max().unwrap();
    let delta_len = n * (hi - lo) as usize + 1;
    let xi_len = n * max_in + 1;
    let needed = delta_len * xi_len;
    if needed > window {
        return Err(Error::WindowOverflow { needed, window });
    }
    let mut cur = vec![DoubleDouble::ZERO; needed];
    cur[0] = DoubleDouble::from_f64(1.0);
    let mut next = vec![DoubleDouble::ZERO; needed];
    for _ in 0..n {
        next.fill(DoubleDouble::ZERO);
        for d in 0..delta_len {
            for x in 0..xi_len {
                let c = cur[d * xi_len + x];
                if c.hi == 0.0 {
                    continue;
                }
                for a in &atoms {
                    let nd = d + (a.k_in as i64 - a.k_out as i64 - lo) as usize;
                    let nx = x + a.k_in as usize;
                    let idx = nd * xi_len + nx;
                    next[idx] = next[idx] + c * DoubleDouble::from_f64(a.prob);
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(JointPmf {
        delta_offset: n as i64 * lo,
        delta_len,
        xi_len,
        probs: dd_to_vec(&cur),
    })
}

/// `P(R_n >= m, Delta_n = 0)` with `R_n` the number of vertices of positive
/// in-degree.
pub fn prob_balanced_with_min_positive(law: &JointDegreeLaw, n: usize, m: usize, window: usize) -> Result<f64> {
    let atoms: Vec<_> = law.atoms().iter().filter(|a| a.prob > 0.0).collect();
    if atoms.is_empty() {
        return Err(Error::EmptySupport);
    }
    let lo = atoms.iter().map(|a| a.k_in as i64 - a.k_out as i64).min().unwrap();
    let hi = atoms.iter().map(|a| a.k_in as i64 - a.k_out as i64).max().unwrap();
    let delta_len = n * (hi - lo) as usize + 1;
    let needed = delta_len * (n + 1);
    if needed > window {
        return Err(Error::WindowOverflow { needed, window });
    }
    // cur[r * delta_len + d]
    let mut cur = vec![DoubleDouble::ZERO; needed];
    cur[0] = DoubleDouble::from_f64(1.0);
    let mut next = vec![DoubleDouble::ZERO; needed];
    for _ in 0..n {
        next.fill(DoubleDouble::ZERO);
        for r in 0..=n {
            for d in 0..delta_len {
                let c = cur[r * delta_len + d];
                if c.hi == 0.0 {
                    continue;
                }
                for a in &atoms {
                    let nr = r + usize::from(a.k_in > 0);
                    let nd = d + (a.k_in as i64 - a.k_out as i64 - lo) as usize;
                    let idx = nr * delta_len + nd;
                    next[idx] = next[idx] + c * DoubleDouble::from_f64(a.prob);
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let zero = -(n as i64) * lo;
    if zero < 0 || zero as usize >= delta_len {
        return Ok(0.0);
    }
    let mut acc = DoubleDouble::ZERO;
    for r in m..=n {
        acc = acc + cur[r * delta_len + zero as usize];
    }
    Ok(acc.to_f64())
}

/// Covariance of the summands in one or two dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Covariance {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

/// Local limit prediction `n^{-d/2} det(L) f(x / sqrt n)` where `x` is the
/// deviation of the target point from `n` times the mean.
pub fn llt_prediction(n: usize, lattice_det: u64, cov: Covariance, deviation: &[f64]) -> Result<f64> {
    let nf = n as f64;
    let det_l = lattice_det as f64;
    match cov {
        Covariance::Scalar(s2) => {
            if !(s2 > 0.0) || deviation.len() != 1 {
                return Err(Error::NotPositiveDefinite);
            }
            let x = deviation[0] / nf.sqrt();
            let f = (-0.5 * x * x / s2).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
            Ok(det_l * f / nf.sqrt())
        }
        Covariance::Matrix(c) => {
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            if !(c[0][0] > 0.0) || !(det > 0.0) || deviation.len() != 2 {
                return Err(Error::NotPositiveDefinite);
            }
            let x = [deviation[0] / nf.sqrt(), deviation[1] / nf.sqrt()];
            let quad = (c[1][1] * x[0] * x[0] - 2.0 * c[0][1] * x[0] * x[1] + c[0][0] * x[1] * x[1]) / det;
            let f = (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * det.sqrt());
            Ok(det_l * f / nf)
        }
    }
}

/// Main lattice of `(D- - D+, D-)` over the support of `law`.
pub fn law_lattice(law: &JointDegreeLaw) -> Result<IntLattice2> {
    let pts: Vec<(i64, i64)> = law
        .atoms()
        .iter()
        .filter(|a| a.prob > 0.0)
        .map(|a| (a.k_in as i64 - a.k_out as i64, a.k_in as i64))
        .collect();
    main_lattice(&pts)
}

/// Variance of `D- - D+`.
pub fn difference_variance(law: &JointDegreeLaw) -> f64 {
    let m = law.mean_in() - law.mean_out();
    law.difference_pmf()
        .iter()
        .map(|&(d, p)| p * (d as f64 - m).powi(2))
        .sum()
}

/// Exact versus predicted probabilities of `Delta_n = y` for one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LltRow {
    pub n: usize,
    pub y: i64,
    pub exact: f64,
    pub predicted: f64,
    pub rel_error: f64,
}

/// Compares the exact law of `Delta_n` with the univariate local limit at the
/// points `y`. The difference variable must be aperiodic.
pub fn llt_check(law: &JointDegreeLaw, n: usize, ys: &[i64], window: usize) -> Result<Vec<LltRow>> {
    let pmf = exact_sum_pmf(law, n, window)?;
    let s2 = difference_variance(law);
    let mean = law.mean_in() - law.mean_out();
    let (period, _) = crate::degree_law::difference_lattice(law)?;
    ys.iter()
        .map(|&y| {
            let exact = pmf.prob(y);
            let predicted = llt_prediction(n, period.max(1), Covariance::Scalar(s2), &[y as f64 - n as f64 * mean])?;
            Ok(LltRow {
                n,
                y,
                exact,
                predicted,
                rel_error: (exact - predicted).abs() / predicted,
            })
        })
        .collect()
}
