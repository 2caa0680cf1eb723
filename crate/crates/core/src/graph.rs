//! Conditioned degree sequences and the directed configuration model.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::degree_law::{difference_lattice, difference_offset, JointDegreeLaw, LawKind};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, tag};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    pub d_minus: Vec<u32>,
    pub d_plus: Vec<u32>,
    pub total: u64,
}

impl DegreeSequence {
    /// Builds a sequence, checking that in- and out-totals agree.
    pub fn new(d_minus: Vec<u32>, d_plus: Vec<u32>) -> Result<Self> {
        if d_minus.len() != d_plus.len() {
            return Err(Error::Precondition("degree vectors differ in length".into()));
        }
        let total_in: u64 = d_minus.iter().map(|&d| d as u64).sum();
        let total_out: u64 = d_plus.iter().map(|&d| d as u64).sum();
        if total_in != total_out {
            return Err(Error::Unbalanced { total_in, total_out });
        }
        Ok(DegreeSequence {
            d_minus,
            d_plus,
            total: total_in,
        })
    }

    pub fn n(&self) -> usize {
        self.d_minus.len()
    }
}

/// A directed multigraph on vertices `0..n`, edges kept as distinct records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    /// Per edge: (out-slot index at the tail, in-slot index at the head).
    pub half_edge_labels: Vec<(u32, u32)>,
}

impl Digraph {
    /// Builds a digraph from an edge list; slot labels follow edge order.
    pub fn from_edges(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut out_seen = vec![0u32; n];
        let mut in_seen = vec![0u32; n];
        let half_edge_labels = edges
            .iter()
            .map(|&(t, h)| {
                let a = out_seen[t as usize];
                let b = in_seen[h as usize];
                out_seen[t as usize] += 1;
                in_seen[h as usize] += 1;
                (a, b)
            })
            .collect();
        Digraph {
            n,
            edges,
            half_edge_labels,
        }
    }

    pub fn in_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n];
        for &(_, h) in &self.edges {
            d[h as usize] += 1;
        }
        d
    }

    pub fn out_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n];
        for &(t, _) in &self.edges {
            d[t as usize] += 1;
        }
        d
    }

    /// Out-adjacency in compressed form: edge ids of vertex `v` are
    /// `ids[offsets[v]..offsets[v + 1]]`, ordered by out-slot label.
    pub fn out_adjacency(&self) -> Adjacency {
        let mut offsets = vec![0usize; self.n + 1];
        for &(t, _) in &self.edges {
            offsets[t as usize + 1] += 1;
        }
        for v in 0..self.n {
            offsets[v + 1] += offsets[v];
        }
        let mut ids = vec![0u32; self.edges.len()];
        let mut fill = offsets.clone();
        for (e, &(t, _)) in self.edges.iter().enumerate() {
            ids[fill[t as usize]] = e as u32;
            fill[t as usize] += 1;
        }
        for v in 0..self.n {
            ids[offsets[v]..offsets[v + 1]].sort_by_key(|&e| self.half_edge_labels[e as usize].0);
        }
        Adjacency { offsets, ids }
    }

    /// Writes the `n m` / `tail head` text format.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(12 * self.edges.len() + 16);
        let _ = writeln!(s, "{} {}", self.n, self.edges.len());
        for &(t, h) in &self.edges {
            let _ = writeln!(s, "{t} {h}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))?;
        let mut it = header.split_whitespace();
        let n: usize = parse_field(it.next(), "n")?;
        let m: usize = parse_field(it.next(), "m")?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let mut it = line.split_whitespace();
            let t: u32 = parse_field(it.next(), "tail")?;
            let h: u32 = parse_field(it.next(), "head")?;
            if t as usize >= n || h as usize >= n {
                return Err(Error::Parse(format!("edge {t} {h} out of range")));
            }
            edges.push((t, h));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("expected {m} edges, found {}", edges.len())));
        }
        Ok(Digraph::from_edges(n, edges))
    }
}

fn parse_field<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    s.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

#[derive(Debug, Clone)]
pub struct Adjacency {
    pub offsets: Vec<usize>,
    pub ids: Vec<u32>,
}

impl Adjacency {
    pub fn of(&self, v: usize) -> &[u32] {
        &self.ids[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnomalousCounts {
    pub self_loops: u64,
    /// Unordered pairs of distinct non-loop edges with the same (tail, head).
    pub parallel_pairs: u64,
}

impl AnomalousCounts {
    pub fn is_simple(&self) -> bool {
        self.self_loops == 0 && self.parallel_pairs == 0
    }
}

pub fn count_anomalous(g: &Digraph) -> AnomalousCounts {
    let mut self_loops = 0u64;
    let mut keys: Vec<u64> = Vec::with_capacity(g.edges.len());
    for &(t, h) in &g.edges {
        if t == h {
            self_loops += 1;
        } else {
            keys.push(((t as u64) << 32) | h as u64);
        }
    }
    keys.sort_unstable();
    let mut parallel_pairs = 0u64;
    let mut i = 0;
    while i < keys.len() {
        let mut j = i + 1;
        while j < keys.len() && keys[j] == keys[i] {
            j += 1;
        }
        let c = (j - i) as u64;
        parallel_pairs += c * (c - 1) / 2;
        i = j;
    }
    AnomalousCounts {
        self_loops,
        parallel_pairs,
    }
}

/// Draws i.i.d. degree vectors and keeps the first balanced one.
///
/// Each attempt is realised through sufficient statistics so it costs far less
/// than `n` draws: for a product of Poisson laws the two totals are Poisson and
/// the degrees are a uniform multinomial split of them; for finite tables the
/// atom counts are multinomial and the vertex labels a uniform shuffle. Both
/// give exactly the law of `n` i.i.d. draws, and an attempt is accepted
/// exactly when the plain draw would be.
#[derive(Debug, Clone)]
pub struct DegreeConditioner {
    n: usize,
    method: Method,
}

#[derive(Debug, Clone)]
enum Method {
    Poisson { lambda_minus: f64, lambda_plus: f64 },
    Atoms { pairs: Vec<(u32, u32)>, probs: Vec<f64> },
}

impl DegreeConditioner {
    pub fn new(law: &JointDegreeLaw, n: usize) -> Result<Self> {
        let (period, _) = difference_lattice(law)?;
        let c = difference_offset(law).ok_or(Error::EmptySupport)?;
        let compatible = if period == 0 {
            c == 0 || n == 0
        } else {
            (c as i128 * n as i128).rem_euclid(period as i128) == 0
        };
        if !compatible {
            return Err(Error::IncompatiblePeriod { n, period });
        }
        let method = match law.kind() {
            LawKind::ProductPoisson {
                lambda_minus,
                lambda_plus,
            } => Method::Poisson {
                lambda_minus,
                lambda_plus,
            },
            _ => Method::Atoms {
                pairs: law.atoms().iter().map(|a| (a.k_in, a.k_out)).collect(),
                probs: law.atoms().iter().map(|a| a.prob).collect(),
            },
        };
        Ok(DegreeConditioner { n, method })
    }

    /// One attempt; `Some` exactly when the drawn totals balance.
    pub fn attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<DegreeSequence> {
        let n = self.n;
        match &self.method {
            Method::Poisson {
                lambda_minus,
                lambda_plus,
            } => {
                let tin = poisson_total(*lambda_minus * n as f64, rng);
                let tout = poisson_total(*lambda_plus * n as f64, rng);
                if tin != tout {
                    return None;
                }
                let d_minus = uniform_split(tin, n, rng);
                let d_plus = uniform_split(tout, n, rng);
                Some(DegreeSequence {
                    d_minus,
                    d_plus,
                    total: tin,
                })
            }
            Method::Atoms { pairs, probs } => {
                let counts = multinomial(n as u64, probs, rng);
                let mut balance: i128 = 0;
                for (c, &(a, b)) in counts.iter().zip(pairs) {
                    balance += *c as i128 * (a as i128 - b as i128);
                }
                if balance != 0 {
                    return None;
                }
                let mut drawn: Vec<(u32, u32)> = Vec::with_capacity(n);
                for (c, &p) in counts.iter().zip(pairs) {
                    drawn.extend(std::iter::repeat_n(p, *c as usize));
                }
                drawn.shuffle(rng);
                let total = drawn.iter().map(|p| p.0 as u64).sum();
                Some(DegreeSequence {
                    d_minus: drawn.iter().map(|p| p.0).collect(),
                    d_plus: drawn.iter().map(|p| p.1).collect(),
                    total,
                })
            }
        }
    }
}

fn poisson_total<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
}

fn uniform_split<R: Rng + ?Sized>(total: u64, n: usize, rng: &mut R) -> Vec<u32> {
    let mut d = vec![0u32; n];
    for _ in 0..total {
        d[rng.random_range(0..n)] += 1;
    }
    d
}

fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

/// Samples `n` i.i.d. degree pairs conditioned on equal in- and out-totals.
/// Returns the sequence and the number of attempts used.
pub fn sample_conditioned_degrees_counted(
    law: &JointDegreeLaw,
    n: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(DegreeSequence, usize)> {
    let cond = DegreeConditioner::new(law, n)?;
    for attempt in 0..max_attempts {
        let mut rng = derive_rng(seed, &[tag::DEGREES, attempt as u64]);
        if let Some(seq) = cond.attempt(&mut rng) {
            return Ok((seq, attempt + 1));
        }
    }
    Err(Error::AttemptsExhausted {
        attempts: max_attempts,
        rate: 0.0,
    })
}

pub fn sample_conditioned_degrees(
    law: &JointDegreeLaw,
    n: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<DegreeSequence> {
    sample_conditioned_degrees_counted(law, n, seed, max_attempts).map(|x| x.0)
}

/// Uniform bijection between out-half-edges and in-half-edges.
pub fn pair_configuration(seq: &DegreeSequence, seed: u64) -> Result<Digraph> {
    let mut rng = derive_rng(seed, &[tag::PAIRING]);
    pair_configuration_with(seq, &mut rng)
}

pub fn pair_configuration_with<R: Rng + ?Sized>(seq: &DegreeSequence, rng: &mut R) -> Result<Digraph> {
    let total_in: u64 = seq.d_minus.iter().map(|&d| d as u64).sum();
    let total_out: u64 = seq.d_plus.iter().map(|&d| d as u64).sum();
    if total_in != total_out {
        return Err(Error::Unbalanced { total_in, total_out });
    }
    let m = total_in as usize;
    let mut in_slots: Vec<(u32, u32)> = Vec::with_capacity(m);
    for (v, &d) in seq.d_minus.iter().enumerate() {
        for s in 0..d {
            in_slots.push((v as u32, s));
        }
    }
    in_slots.shuffle(rng);
    let mut edges = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    let mut k = 0;
    for (v, &d) in seq.d_plus.iter().enumerate() {
        for s in 0..d {
            let (h, hs) = in_slots[k];
            k += 1;
            edges.push((v as u32, h));
            labels.push((s, hs));
        }
    }
    Ok(Digraph {
        n: seq.n(),
        edges,
        half_edge_labels: labels,
    })
}

/// Repeats conditioning and pairing until the pairing is simple.
/// `budget` bounds the number of pairings tried.
pub fn sample_simple(law: &JointDegreeLaw, n: usize, seed: u64, budget: usize) -> Result<Digraph> {
    sample_simple_counted(law, n, seed, budget).map(|x| x.0)
}

pub fn sample_simple_counted(law: &JointDegreeLaw, n: usize, seed: u64, budget: usize) -> Result<(Digraph, usize)> {
    let cond = DegreeConditioner::new(law, n)?;
    let mut degree_attempt = 0u64;
    for trial in 0..budget {
        let seq = loop {
            let mut rng = derive_rng(seed, &[tag::DEGREES, degree_attempt]);
            degree_attempt += 1;
            if let Some(seq) = cond.attempt(&mut rng) {
                break seq;
            }
            if degree_attempt > 1 << 40 {
                return Err(Error::AttemptsExhausted {
                    attempts: degree_attempt as usize,
                    rate: 0.0,
                });
            }
        };
        let mut rng = derive_rng(seed, &[tag::PAIRING, trial as u64]);
        let g = pair_configuration_with(&seq, &mut rng)?;
        if count_anomalous(&g).is_simple() {
            return Ok((g, trial + 1));
        }
    }
    Err(Error::AttemptsExhausted {
        attempts: budget,
        rate: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn point_mass_accepts_immediately() {
        let law = JointDegreeLaw::table(&[(1, 1, 1.0)]).unwrap();
        let (seq, attempts) = sample_conditioned_degrees_counted(&law, 5, 1, 10).unwrap();
        assert_eq!(attempts, 1);
        assert_eq!(seq.total, 5);
    }

    #[test]
    fn incompatible_period_is_reported() {
        let law = JointDegreeLaw::table(&[(0, 2, 0.5), (2, 0, 0.5)]).unwrap();
        assert_eq!(
            sample_conditioned_degrees(&law, 3, 1, 10).unwrap_err(),
            Error::IncompatiblePeriod { n: 3, period: 4 }
        );
        assert!(sample_conditioned_degrees(&law, 4, 1, 1000).is_ok());
    }

    #[test]
    fn pairing_preserves_degrees() {
        let law = JointDegreeLaw::product_poisson(1.0, 1.0).unwrap();
        let seq = sample_conditioned_degrees(&law, 300, 9, 100_000).unwrap();
        let g = pair_configuration(&seq, 4).unwrap();
        assert_eq!(g.edges.len() as u64, seq.total);
        assert_eq!(g.in_degrees(), seq.d_minus);
        assert_eq!(g.out_degrees(), seq.d_plus);
    }

    #[test]
    fn unbalanced_pairing_rejected() {
        let seq = DegreeSequence {
            d_minus: vec![1, 0],
            d_plus: vec![0, 0],
            total: 1,
        };
        assert!(matches!(pair_configuration(&seq, 0), Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn anomalous_counts() {
        let cycle = Digraph::from_edges(3, vec![(0, 1), (1, 2), (2, 0)]);
        assert_eq!(count_anomalous(&cycle), AnomalousCounts::default());
        let seq = DegreeSequence::new(vec![2], vec![2]).unwrap();
        let g = pair_configuration_with(&seq, &mut rng_from_seed(0)).unwrap();
        assert_eq!(count_anomalous(&g).self_loops, 2);
        let par = Digraph::from_edges(2, vec![(0, 1), (0, 1)]);
        assert_eq!(count_anomalous(&par).parallel_pairs, 1);
    }

    #[test]
    fn single_vertex_never_simple() {
        let law = JointDegreeLaw::table(&[(1, 1, 1.0)]).unwrap();
        assert!(matches!(sample_simple(&law, 1, 3, 20), Err(Error::AttemptsExhausted { .. })));
        let g = sample_simple(&law, 3, 3, 1000).unwrap();
        assert!(count_anomalous(&g).is_simple());
    }

    #[test]
    fn text_round_trip() {
        let g = Digraph::from_edges(4, vec![(0, 1), (1, 2), (3, 3)]);
        let back = Digraph::from_text(&g.to_text()).unwrap();
        assert_eq!(back.edges, g.edges);
        assert_eq!(back.n, 4);
        assert!(Digraph::from_text("2 1\n0 5\n").is_err());
    }
}
