//! Joint in/out degree laws and the parameters that govern the critical window.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, CompensatedSum};

pub const DEFAULT_TRUNCATION: u32 = 64;
/// Accepted deviation of a finite table's total mass from one.
pub const TABLE_MASS_TOLERANCE: f64 = 1e-9;
/// Largest tail mass (scaled by the cube of the cutoff) accepted for analytic families.
pub const TAIL_BOUND: f64 = 1e-8;
const BASE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawKind {
    Table,
    ProductPoisson { lambda_minus: f64, lambda_plus: f64 },
    ProductGeometric { p_minus: f64, p_plus: f64 },
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub k_in: u32,
    pub k_out: u32,
    pub prob: f64,
}

/// Law of a pair `(D-, D+)` supported on a finite grid.
#[derive(Debug, Clone)]
pub struct JointDegreeLaw {
    kind: LawKind,
    atoms: Vec<Atom>,
    truncation: u32,
    tolerance: f64,
}

/// Config-file form of a law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    Table {
        entries: Vec<(u32, u32, f64)>,
    },
    PoissonProduct {
        lambda_minus: f64,
        lambda_plus: f64,
        #[serde(default)]
        truncation: Option<u32>,
    },
    GeometricProduct {
        p_minus: f64,
        p_plus: f64,
        #[serde(default)]
        truncation: Option<u32>,
    },
}

impl LawSpec {
    pub fn build(&self) -> Result<JointDegreeLaw> {
        match self {
            LawSpec::Table { entries } => JointDegreeLaw::table(entries),
            LawSpec::PoissonProduct {
                lambda_minus,
                lambda_plus,
                truncation,
            } => JointDegreeLaw::product_poisson_truncated(
                *lambda_minus,
                *lambda_plus,
                truncation.unwrap_or(DEFAULT_TRUNCATION),
            ),
            LawSpec::GeometricProduct {
                p_minus,
                p_plus,
                truncation,
            } => JointDegreeLaw::product_geometric(
                *p_minus,
                *p_plus,
                truncation.unwrap_or(DEFAULT_TRUNCATION),
            ),
        }
    }

    pub fn poisson(lambda: f64) -> Self {
        LawSpec::PoissonProduct {
            lambda_minus: lambda,
            lambda_plus: lambda,
            truncation: None,
        }
    }
}

fn poisson_pmf(lambda: f64, k: u32) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - ln_factorial(k as u64)).exp()
}

/// `P(X = k) = p (1 - p)^k` on `{0, 1, ...}`.
fn geometric_pmf(p: f64, k: u32) -> f64 {
    p * (1.0 - p).powi(k as i32)
}

impl JointDegreeLaw {
    /// A finite table of `(k_in, k_out, probability)` entries.
    pub fn table(entries: &[(u32, u32, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptySupport);
        }
        let mut atoms: Vec<Atom> = Vec::with_capacity(entries.len());
        for &(a, b, p) in entries {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::InvalidLaw(format!("probability {p} at ({a},{b})")));
            }
            if atoms.iter().any(|x| x.k_in == a && x.k_out == b) {
                return Err(Error::InvalidLaw(format!("duplicate entry ({a},{b})")));
            }
            atoms.push(Atom {
                k_in: a,
                k_out: b,
                prob: p,
            });
        }
        let total = total_mass(&atoms);
        if (total - 1.0).abs() > TABLE_MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!("total mass {total}")));
        }
        atoms.sort_by_key(|a| (a.k_in, a.k_out));
        let truncation = atoms.iter().map(|a| a.k_in.max(a.k_out)).max().unwrap_or(0);
        Ok(JointDegreeLaw {
            kind: LawKind::Table,
            atoms,
            truncation,
            tolerance: TABLE_MASS_TOLERANCE.max((total - 1.0).abs()),
        })
    }

    pub fn product_poisson(lambda_minus: f64, lambda_plus: f64) -> Result<Self> {
        Self::product_poisson_truncated(lambda_minus, lambda_plus, DEFAULT_TRUNCATION)
    }

    pub fn product_poisson_truncated(lambda_minus: f64, lambda_plus: f64, truncation: u32) -> Result<Self> {
        if !(lambda_minus >= 0.0 && lambda_plus >= 0.0) || !lambda_minus.is_finite() || !lambda_plus.is_finite() {
            return Err(Error::InvalidLaw("Poisson rates must be finite and nonnegative".into()));
        }
        let kind = LawKind::ProductPoisson {
            lambda_minus,
            lambda_plus,
        };
        Self::from_marginals(
            kind,
            |k| poisson_pmf(lambda_minus, k),
            |k| poisson_pmf(lambda_plus, k),
            truncation,
        )
    }

    /// Product of Poisson marginals conditioned on `{0..=truncation}`: the
    /// mass beyond the cut is redistributed, so any truncation is accepted.
    /// The result is a table law.
    pub fn product_poisson_renormalized(lambda_minus: f64, lambda_plus: f64, truncation: u32) -> Result<Self> {
        if !(lambda_minus >= 0.0 && lambda_plus >= 0.0) || !lambda_minus.is_finite() || !lambda_plus.is_finite() {
            return Err(Error::InvalidLaw("Poisson rates must be finite and nonnegative".into()));
        }
        let marginal = |lambda: f64| {
            let p: Vec<f64> = (0..=truncation).map(|k| poisson_pmf(lambda, k)).collect();
            let z: f64 = compensated_sum(p.iter().copied());
            p.into_iter().map(move |x| x / z).collect::<Vec<f64>>()
        };
        let (pin, pout) = (marginal(lambda_minus), marginal(lambda_plus));
        let mut entries = Vec::new();
        for (a, &x) in pin.iter().enumerate() {
            for (b, &y) in pout.iter().enumerate() {
                if x * y > 0.0 {
                    entries.push((a as u32, b as u32, x * y));
                }
            }
        }
        Self::table(&entries)
    }

    pub fn product_geometric(p_minus: f64, p_plus: f64, truncation: u32) -> Result<Self> {
        if !(p_minus > 0.0 && p_minus <= 1.0 && p_plus > 0.0 && p_plus <= 1.0) {
            return Err(Error::InvalidLaw("geometric parameters must lie in (0, 1]".into()));
        }
        let kind = LawKind::ProductGeometric { p_minus, p_plus };
        Self::from_marginals(
            kind,
            |k| geometric_pmf(p_minus, k),
            |k| geometric_pmf(p_plus, k),
            truncation,
        )
    }

    fn from_marginals(
        kind: LawKind,
        f_in: impl Fn(u32) -> f64,
        f_out: impl Fn(u32) -> f64,
        truncation: u32,
    ) -> Result<Self> {
        let pin: Vec<f64> = (0..=truncation).map(&f_in).collect();
        let pout: Vec<f64> = (0..=truncation).map(&f_out).collect();
        let mut atoms = Vec::new();
        for (a, &x) in pin.iter().enumerate() {
            for (b, &y) in pout.iter().enumerate() {
                let p = x * y;
                if p > 0.0 {
                    atoms.push(Atom {
                        k_in: a as u32,
                        k_out: b as u32,
                        prob: p,
                    });
                }
            }
        }
        Self::finish_truncated(kind, atoms, truncation)
    }

    /// A law given by an arbitrary pmf, evaluated on `{0..=truncation}^2`.
    pub fn custom(pmf: impl Fn(u32, u32) -> f64, truncation: u32) -> Result<Self> {
        let mut atoms = Vec::new();
        for a in 0..=truncation {
            for b in 0..=truncation {
                let p = pmf(a, b);
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    return Err(Error::InvalidLaw(format!("probability {p} at ({a},{b})")));
                }
                if p > 0.0 {
                    atoms.push(Atom {
                        k_in: a,
                        k_out: b,
                        prob: p,
                    });
                }
            }
        }
        Self::finish_truncated(LawKind::Custom, atoms, truncation)
    }

    fn finish_truncated(kind: LawKind, atoms: Vec<Atom>, truncation: u32) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        let total = total_mass(&atoms);
        if total > 1.0 + TABLE_MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!("total mass {total} exceeds 1")));
        }
        let deficit = (1.0 - total).max(0.0);
        let cube = (truncation as f64 + 1.0).powi(3);
        if deficit * cube > TAIL_BOUND {
            return Err(Error::TailNotConvergent {
                deficit,
                tolerance: TAIL_BOUND / cube,
            });
        }
        Ok(JointDegreeLaw {
            kind,
            atoms,
            truncation,
            tolerance: BASE_TOLERANCE + deficit,
        })
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn pmf(&self, k_in: u32, k_out: u32) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.k_in == k_in && a.k_out == k_out)
            .map_or(0.0, |a| a.prob)
    }

    /// `E[(D-)^i (D+)^j]` over the stored support.
    pub fn moment(&self, i: u32, j: u32) -> f64 {
        let mut acc = CompensatedSum::new();
        for a in &self.atoms {
            acc.add((a.k_in as f64).powi(i as i32) * (a.k_out as f64).powi(j as i32) * a.prob);
        }
        acc.value()
    }

    pub fn mean_in(&self) -> f64 {
        self.moment(1, 0)
    }

    pub fn mean_out(&self) -> f64 {
        self.moment(0, 1)
    }

    /// `P(D- > 0)`.
    pub fn positive_in_prob(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for a in self.atoms.iter().filter(|a| a.k_in > 0) {
            acc.add(a.prob);
        }
        acc.value()
    }

    /// A sampler for single draws of `(D-, D+)`.
    pub fn sampler(&self) -> AtomSampler {
        AtomSampler::new(&self.atoms)
    }

    /// Law of `D- - D+` as a sorted list of `(value, probability)`.
    pub fn difference_pmf(&self) -> Vec<(i64, f64)> {
        let mut out: Vec<(i64, CompensatedSum)> = Vec::new();
        for a in &self.atoms {
            let d = a.k_in as i64 - a.k_out as i64;
            match out.binary_search_by_key(&d, |x| x.0) {
                Ok(i) => out[i].1.add(a.prob),
                Err(i) => {
                    let mut s = CompensatedSum::new();
                    s.add(a.prob);
                    out.insert(i, (d, s));
                }
            }
        }
        out.into_iter().map(|(d, s)| (d, s.value())).collect()
    }
}

fn total_mass(atoms: &[Atom]) -> f64 {
    let mut acc = CompensatedSum::new();
    for a in atoms {
        acc.add(a.prob);
    }
    acc.value()
}

/// Draws atoms of a finite law.
#[derive(Debug, Clone)]
pub struct AtomSampler {
    pairs: Vec<(u32, u32)>,
    index: WeightedIndex<f64>,
}

impl AtomSampler {
    fn new(atoms: &[Atom]) -> Self {
        let pairs = atoms.iter().map(|a| (a.k_in, a.k_out)).collect();
        let index = WeightedIndex::new(atoms.iter().map(|a| a.prob)).expect("law has positive mass");
        AtomSampler { pairs, index }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, u32) {
        self.pairs[self.index.sample(rng)]
    }
}

/// The five parameters of the critical window and the coefficients of the limit object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalParams {
    pub mu: f64,
    pub nu_minus: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub sigma_minus_plus: f64,
    /// Coefficient of the downward parabolic drift, `(s_mp + nu) / (2 s_p mu)`.
    pub drift_coeff: f64,
    /// Intensity of the ancestral-mark Cox process per unit of reflected path.
    pub cox_coeff: f64,
    /// Intensity of candidates per unit of marked-tree length.
    pub candidate_coeff: f64,
    /// Factor turning the reflected path into tree heights, `2 / s_p`.
    pub height_scale: f64,
}

impl CriticalParams {
    /// Builds the parameter set from the five base quantities.
    ///
    /// When `sigma_plus` is zero the continuum coefficients are undefined and
    /// stored as NaN.
    pub fn from_base(mu: f64, nu_minus: f64, sigma_minus: f64, sigma_plus: f64, sigma_minus_plus: f64) -> Self {
        let a = sigma_minus_plus + nu_minus;
        let (drift_coeff, cox_coeff, height_scale) = if sigma_plus > 0.0 {
            (
                a / (2.0 * sigma_plus * mu),
                2.0 * a / (sigma_plus * mu * mu),
                2.0 / sigma_plus,
            )
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        CriticalParams {
            mu,
            nu_minus,
            sigma_minus,
            sigma_plus,
            sigma_minus_plus,
            drift_coeff,
            cox_coeff,
            candidate_coeff: a / (mu * mu),
            height_scale,
        }
    }

    pub fn has_continuum_limit(&self) -> bool {
        self.sigma_plus > 0.0 && self.drift_coeff.is_finite()
    }
}

pub fn compute_params(law: &JointDegreeLaw) -> Result<CriticalParams> {
    let mean_in = law.mean_in();
    let mean_out = law.mean_out();
    if (mean_in - mean_out).abs() > law.tolerance().max(1e-9) * mean_in.max(1.0) {
        return Err(Error::UnequalMeans { mean_in, mean_out });
    }
    let mu = mean_in;
    if mu <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let e_in2 = law.moment(2, 0);
    let e_in3 = law.moment(3, 0);
    let e_in_out2 = law.moment(1, 2);
    let e_in2_out = law.moment(2, 1);
    let nu_minus = (e_in2 - mu) / mu;
    let sigma_minus = ((mu * e_in3 - e_in2 * e_in2) / (mu * mu)).max(0.0).sqrt();
    let sigma_plus = ((e_in_out2 - mu) / mu).max(0.0).sqrt();
    let sigma_minus_plus = (e_in2_out - e_in2) / mu;
    Ok(CriticalParams::from_base(
        mu,
        nu_minus,
        sigma_minus,
        sigma_plus,
        sigma_minus_plus,
    ))
}

pub fn check_criticality(law: &JointDegreeLaw, tol: f64) -> bool {
    (law.moment(1, 1) - law.mean_in()).abs() <= tol
}

/// The in-degree size-biased companion `Z` of a law.
#[derive(Debug, Clone)]
pub struct SizeBiasedLaw {
    law: JointDegreeLaw,
}

impl SizeBiasedLaw {
    pub fn as_law(&self) -> &JointDegreeLaw {
        &self.law
    }

    pub fn atoms(&self) -> &[Atom] {
        self.law.atoms()
    }

    pub fn pmf(&self, k_in: u32, k_out: u32) -> f64 {
        self.law.pmf(k_in, k_out)
    }

    pub fn sampler(&self) -> AtomSampler {
        self.law.sampler()
    }
}

pub fn size_biased(law: &JointDegreeLaw) -> Result<SizeBiasedLaw> {
    let mu = law.mean_in();
    if mu <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let atoms: Vec<Atom> = law
        .atoms()
        .iter()
        .filter(|a| a.k_in > 0)
        .map(|a| Atom {
            k_in: a.k_in,
            k_out: a.k_out,
            prob: a.k_in as f64 * a.prob / mu,
        })
        .collect();
    let kind = match law.kind() {
        LawKind::Table => LawKind::Table,
        _ => LawKind::Custom,
    };
    Ok(SizeBiasedLaw {
        law: JointDegreeLaw {
            kind,
            atoms,
            truncation: law.truncation(),
            tolerance: law.tolerance() * (1.0 + law.truncation() as f64),
        },
    })
}

/// Minimal period of the support of `D- - D+` and whether the law is strongly aperiodic.
///
/// A point mass yields period `0` (no period is meaningful).
pub fn difference_lattice(law: &JointDegreeLaw) -> Result<(u64, bool)> {
    let support: Vec<i64> = law
        .difference_pmf()
        .into_iter()
        .filter(|&(_, p)| p > 0.0)
        .map(|(d, _)| d)
        .collect();
    let Some(&c) = support.first() else {
        return Err(Error::EmptySupport);
    };
    let period = support.iter().fold(0u64, |g, &d| gcd(g, (d - c).unsigned_abs()));
    Ok((period, period == 1))
}

/// A point of the support of `D- - D+` (the coset representative used by [`difference_lattice`]).
pub fn difference_offset(law: &JointDegreeLaw) -> Option<i64> {
    law.difference_pmf().into_iter().find(|&(_, p)| p > 0.0).map(|(d, _)| d)
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_product_parameters() {
        let law = JointDegreeLaw::product_poisson(1.0, 1.0).unwrap();
        let p = compute_params(&law).unwrap();
        assert!((p.mu - 1.0).abs() < 1e-12);
        assert!((p.sigma_plus - 1.0).abs() < 1e-12);
        assert!((p.nu_minus - 1.0).abs() < 1e-12);
        assert!(p.sigma_minus_plus.abs() < 1e-12);
        assert!((p.sigma_minus - 1.0).abs() < 1e-12);
        assert!((p.drift_coeff - 0.5).abs() < 1e-12);
        assert!((p.cox_coeff - 2.0).abs() < 1e-12);
        assert!((p.candidate_coeff - 1.0).abs() < 1e-12);
        assert!((p.height_scale - 2.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_parameters_vanish() {
        let law = JointDegreeLaw::table(&[(1, 1, 1.0)]).unwrap();
        let p = compute_params(&law).unwrap();
        assert_eq!(p.mu, 1.0);
        assert_eq!(p.nu_minus, 0.0);
        assert_eq!(p.sigma_minus, 0.0);
        assert_eq!(p.sigma_plus, 0.0);
        assert_eq!(p.sigma_minus_plus, 0.0);
        assert!(!p.has_continuum_limit());
    }

    #[test]
    fn unequal_means_rejected() {
        let law = JointDegreeLaw::table(&[(1, 0, 0.5), (1, 1, 0.5)]).unwrap();
        assert!(matches!(compute_params(&law), Err(Error::UnequalMeans { .. })));
    }

    #[test]
    fn heavy_geometric_tail_rejected() {
        let err = JointDegreeLaw::product_geometric(0.05, 0.05, 64).unwrap_err();
        assert!(matches!(err, Error::TailNotConvergent { .. }));
        assert!(JointDegreeLaw::product_geometric(0.5, 0.5, 64).is_ok());
    }

    #[test]
    fn criticality_flags() {
        let poisson = JointDegreeLaw::product_poisson(1.0, 1.0).unwrap();
        assert!(check_criticality(&poisson, 1e-10));
        let point = JointDegreeLaw::table(&[(1, 1, 1.0)]).unwrap();
        assert!(check_criticality(&point, 1e-12));
        let coupled = JointDegreeLaw::custom(
            |a, b| {
                if a == b {
                    poisson_pmf(1.0, a)
                } else {
                    0.0
                }
            },
            40,
        )
        .unwrap();
        assert!(!check_criticality(&coupled, 1e-6));
        assert!((coupled.moment(1, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn size_biasing() {
        let point = JointDegreeLaw::table(&[(1, 1, 1.0)]).unwrap();
        let z = size_biased(&point).unwrap();
        assert_eq!(z.atoms().len(), 1);
        assert_eq!(z.pmf(1, 1), 1.0);

        let two = JointDegreeLaw::table(&[(0, 1, 0.5), (2, 1, 0.5)]).unwrap();
        let z = size_biased(&two).unwrap();
        assert_eq!(z.pmf(0, 1), 0.0);
        assert!((z.pmf(2, 1) - 1.0).abs() < 1e-15);

        let poisson = JointDegreeLaw::product_poisson(1.0, 1.0).unwrap();
        let z = size_biased(&poisson).unwrap();
        let e1 = (-1.0f64).exp();
        for k in 1..8u32 {
            for j in 0..5u32 {
                let shifted = e1 / (1..k).map(|x| x as f64).product::<f64>();
                let expect = shifted * poisson_pmf(1.0, j);
                assert!((z.pmf(k, j) - expect).abs() < 1e-14);
            }
        }
        let total: f64 = z.atoms().iter().map(|a| a.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean_out = z.as_law().moment(0, 1);
        assert!((mean_out - poisson.moment(1, 1) / poisson.mean_in()).abs() < 1e-12);
    }

    #[test]
    fn lattice_of_differences() {
        let poisson = JointDegreeLaw::product_poisson(1.0, 1.0).unwrap();
        assert_eq!(difference_lattice(&poisson).unwrap(), (1, true));
        let two = JointDegreeLaw::table(&[(0, 2, 0.5), (2, 0, 0.5)]).unwrap();
        assert_eq!(difference_lattice(&two).unwrap(), (4, false));
        let point = JointDegreeLaw::table(&[(1, 1, 1.0)]).unwrap();
        assert_eq!(difference_lattice(&point).unwrap(), (0, false));
    }

    #[test]
    fn spec_round_trip() {
        let spec: LawSpec = serde_json::from_str(r#"{"kind":"poisson_product","lambda_minus":1.0,"lambda_plus":1.0}"#).unwrap();
        assert_eq!(spec, LawSpec::poisson(1.0));
        let spec: LawSpec = serde_json::from_str(r#"{"kind":"table","entries":[[0,1,0.5],[2,1,0.5]]}"#).unwrap();
        let law = spec.build().unwrap();
        assert_eq!(law.atoms().len(), 2);
        assert_eq!(law.pmf(2, 1), 0.5);
    }
}
