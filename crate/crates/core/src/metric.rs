//! Isomorphisms, the length distance and canonical codes for small MDMs.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mdm::Mdm;

pub const DEFAULT_MAX_VERTICES: usize = 24;
pub const DEFAULT_MAX_EDGES: usize = 48;

/// Canonical code of the unit loop (and of any single-vertex single-loop MDM).
pub const LOOP_UNIT_CODE: [u8; 3] = [1, 1, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeCap {
    pub max_vertices: usize,
    pub max_edges: usize,
}

impl Default for SizeCap {
    fn default() -> Self {
        SizeCap {
            max_vertices: DEFAULT_MAX_VERTICES,
            max_edges: DEFAULT_MAX_EDGES,
        }
    }
}

impl SizeCap {
    fn check(&self, m: &Mdm) -> Result<()> {
        if m.vertex_count() > self.max_vertices || m.edge_count() > self.max_edges {
            return Err(Error::SizeCap {
                vertices: m.vertex_count(),
                edges: m.edge_count(),
                max_vertices: self.max_vertices,
                max_edges: self.max_edges,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Isomorphism {
    pub vertex_map: Vec<u32>,
    pub edge_map: Vec<u32>,
}

/// Nonnegative distance with an explicit infinite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtDistance {
    Finite(f64),
    Infinite,
}

impl ExtDistance {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtDistance::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            ExtDistance::Finite(x) => Some(*x),
            ExtDistance::Infinite => None,
        }
    }

    pub fn max(self, other: ExtDistance) -> ExtDistance {
        match (self, other) {
            (ExtDistance::Finite(a), ExtDistance::Finite(b)) => ExtDistance::Finite(a.max(b)),
            _ => ExtDistance::Infinite,
        }
    }
}

impl PartialOrd for ExtDistance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtDistance::Finite(a), ExtDistance::Finite(b)) => a.partial_cmp(b),
            (ExtDistance::Finite(_), ExtDistance::Infinite) => Some(Ordering::Less),
            (ExtDistance::Infinite, ExtDistance::Finite(_)) => Some(Ordering::Greater),
            (ExtDistance::Infinite, ExtDistance::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtDistance::Finite(x) => write!(f, "{x}"),
            ExtDistance::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtDistance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtDistance::Finite(x) => s.serialize_f64(*x),
            ExtDistance::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Dense view: multiplicities and parallel-edge classes.
struct Dense {
    n: usize,
    mult: Vec<u32>,
    classes: Vec<Vec<u32>>,
    sig: Vec<(u32, u32, u32)>,
}

impl Dense {
    fn new(m: &Mdm) -> Self {
        let n = m.vertex_count();
        let mut mult = vec![0u32; n * n];
        let mut classes = vec![Vec::new(); n * n];
        let (din, dout) = m.degrees();
        let mut loops = vec![0u32; n];
        for (i, e) in m.edges.iter().enumerate() {
            let c = e.tail as usize * n + e.head as usize;
            mult[c] += 1;
            classes[c].push(i as u32);
            if e.tail == e.head {
                loops[e.tail as usize] += 1;
            }
        }
        let sig = (0..n).map(|v| (din[v], dout[v], loops[v])).collect();
        Dense {
            n,
            mult,
            classes,
            sig,
        }
    }
}

/// Calls `f` on every vertex bijection compatible with all multiplicities.
fn for_each_vertex_map(a: &Dense, b: &Dense, f: &mut dyn FnMut(&[u32])) {
    if a.n != b.n {
        return;
    }
    let n = a.n;
    let mut map = vec![u32::MAX; n];
    let mut used = vec![false; n];
    fn rec(a: &Dense, b: &Dense, i: usize, map: &mut Vec<u32>, used: &mut Vec<bool>, f: &mut dyn FnMut(&[u32])) {
        let n = a.n;
        if i == n {
            f(map);
            return;
        }
        for j in 0..n {
            if used[j] || a.sig[i] != b.sig[j] {
                continue;
            }
            let ok = (0..i).all(|p| {
                let q = map[p] as usize;
                a.mult[i * n + p] == b.mult[j * n + q] && a.mult[p * n + i] == b.mult[q * n + j]
            }) && a.mult[i * n + i] == b.mult[j * n + j];
            if !ok {
                continue;
            }
            map[i] = j as u32;
            used[j] = true;
            rec(a, b, i + 1, map, used, f);
            used[j] = false;
            map[i] = u32::MAX;
        }
    }
    rec(a, b, 0, &mut map, &mut used, f);
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    fn heap(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(cur.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, cur, out);
            if k.is_multiple_of(2) {
                cur.swap(i, k - 1);
            } else {
                cur.swap(0, k - 1);
            }
        }
    }
    heap(k, &mut cur, &mut out);
    out
}

/// All isomorphisms from `m1` to `m2`, vertex and edge maps included.
pub fn enumerate_isomorphisms(m1: &Mdm, m2: &Mdm, cap: SizeCap) -> Result<Vec<Isomorphism>> {
    cap.check(m1)?;
    cap.check(m2)?;
    if m1.vertex_count() != m2.vertex_count() || m1.edge_count() != m2.edge_count() {
        return Ok(Vec::new());
    }
    let a = Dense::new(m1);
    let b = Dense::new(m2);
    let n = a.n;
    let mut out = Vec::new();
    for_each_vertex_map(&a, &b, &mut |map| {
        let pairs: Vec<(usize, usize)> = (0..n * n)
            .filter(|&c| a.mult[c] > 0)
            .map(|c| (c, map[c / n] as usize * n + map[c % n] as usize))
            .collect();
        let perms: Vec<Vec<Vec<usize>>> = pairs.iter().map(|&(c, _)| permutations(a.classes[c].len())).collect();
        let mut choice = vec![0usize; pairs.len()];
        loop {
            let mut edge_map = vec![u32::MAX; m1.edge_count()];
            for (p, &(c1, c2)) in pairs.iter().enumerate() {
                let perm = &perms[p][choice[p]];
                for (i, &e) in a.classes[c1].iter().enumerate() {
                    edge_map[e as usize] = b.classes[c2][perm[i]];
                }
            }
            out.push(Isomorphism {
                vertex_map: map.to_vec(),
                edge_map,
            });
            let mut p = 0;
            loop {
                if p == pairs.len() {
                    return;
                }
                choice[p] += 1;
                if choice[p] < perms[p].len() {
                    break;
                }
                choice[p] = 0;
                p += 1;
            }
        }
    });
    Ok(out)
}

/// Infimum over isomorphisms of the largest edge-length mismatch.
///
/// For a fixed vertex map the best edge map pairs each class of parallel
/// edges in sorted length order, which minimises the largest mismatch.
pub fn dg_distance(m1: &Mdm, m2: &Mdm) -> ExtDistance {
    if m1.vertex_count() != m2.vertex_count() || m1.edge_count() != m2.edge_count() {
        return ExtDistance::Infinite;
    }
    let a = Dense::new(m1);
    let b = Dense::new(m2);
    let n = a.n;
    let sorted = |m: &Mdm, d: &Dense| -> Vec<Vec<f64>> {
        d.classes
            .iter()
            .map(|c| {
                let mut v: Vec<f64> = c.iter().map(|&e| m.edges[e as usize].length).collect();
                v.sort_by(|x, y| x.total_cmp(y));
                v
            })
            .collect()
    };
    let la = sorted(m1, &a);
    let lb = sorted(m2, &b);
    let mut best: Option<f64> = None;
    for_each_vertex_map(&a, &b, &mut |map| {
        let mut worst = 0.0f64;
        for c in 0..n * n {
            let c2 = map[c / n] as usize * n + map[c % n] as usize;
            for (x, y) in la[c].iter().zip(&lb[c2]) {
                worst = worst.max((x - y).abs());
            }
        }
        if best.is_none_or(|b| worst < b) {
            best = Some(worst);
        }
    });
    match best {
        Some(x) => ExtDistance::Finite(x),
        None => ExtDistance::Infinite,
    }
}

/// Positionwise maximum of `dg_distance` over the first `k` entries, missing
/// entries read as the unit loop.
pub fn sequence_distance(s1: &[Mdm], s2: &[Mdm], k: usize) -> ExtDistance {
    let unit = Mdm::loop_unit();
    let mut acc = ExtDistance::Finite(0.0);
    for i in 0..k {
        let a = s1.get(i).unwrap_or(&unit);
        let b = s2.get(i).unwrap_or(&unit);
        acc = acc.max(dg_distance(a, b));
    }
    acc
}

fn refine(d: &Dense, colors: &mut Vec<u32>) {
    let n = d.n;
    let mut classes = count_classes(colors);
    loop {
        let sigs: Vec<(u32, Vec<(u32, u32)>, Vec<(u32, u32)>)> = (0..n)
            .map(|v| {
                let mut outs: Vec<(u32, u32)> = (0..n)
                    .filter(|&w| d.mult[v * n + w] > 0)
                    .map(|w| (colors[w], d.mult[v * n + w]))
                    .collect();
                let mut ins: Vec<(u32, u32)> = (0..n)
                    .filter(|&w| d.mult[w * n + v] > 0)
                    .map(|w| (colors[w], d.mult[w * n + v]))
                    .collect();
                outs.sort_unstable();
                ins.sort_unstable();
                (colors[v], outs, ins)
            })
            .collect();
        let mut uniq: Vec<&(u32, Vec<(u32, u32)>, Vec<(u32, u32)>)> = sigs.iter().collect();
        uniq.sort();
        uniq.dedup();
        for v in 0..n {
            colors[v] = uniq.binary_search(&&sigs[v]).unwrap() as u32;
        }
        let c = count_classes(colors);
        if c == classes {
            return;
        }
        classes = c;
    }
}

fn count_classes(colors: &[u32]) -> usize {
    let mut c: Vec<u32> = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn code_for_order(d: &Dense, edges: usize, colors: &[u32]) -> Vec<u8> {
    let n = d.n;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| colors[v]);
    let mut code = Vec::with_capacity(2 + n * n);
    code.push(n as u8);
    code.push(edges as u8);
    for &i in &order {
        for &j in &order {
            code.push(d.mult[i * n + j] as u8);
        }
    }
    code
}

fn search(d: &Dense, edges: usize, colors: Vec<u32>, best: &mut Option<Vec<u8>>) {
    let n = d.n;
    let mut counts = vec![0usize; n];
    for &c in &colors {
        counts[c as usize] += 1;
    }
    let Some(target) = (0..n).find(|&c| counts[c] > 1) else {
        let code = code_for_order(d, edges, &colors);
        if best.as_ref().is_none_or(|b| code < *b) {
            *best = Some(code);
        }
        return;
    };
    for v in 0..n {
        if colors[v] as usize != target {
            continue;
        }
        let mut next: Vec<u32> = colors.iter().map(|&c| 2 * c + 1).collect();
        next[v] = 2 * colors[v];
        refine(d, &mut next);
        search(d, edges, next, best);
    }
}

/// Length-blind canonical code: equal for two MDMs exactly when they are
/// isomorphic as directed multigraphs.
///
/// Layout: vertex count, edge count, then the multiplicity matrix row by row
/// in canonical vertex order, one byte each. The order is the
/// lexicographically smallest adjacency encoding over all leaves of an
/// individualisation-refinement search.
pub fn canonical_code(m: &Mdm, cap: SizeCap) -> Result<Vec<u8>> {
    cap.check(m)?;
    let d = Dense::new(m);
    let mut uniq: Vec<(u32, u32, u32)> = d.sig.clone();
    uniq.sort_unstable();
    uniq.dedup();
    let mut colors: Vec<u32> = d.sig.iter().map(|s| uniq.binary_search(s).unwrap() as u32).collect();
    refine(&d, &mut colors);
    let mut best = None;
    search(&d, m.edge_count(), colors, &mut best);
    Ok(best.unwrap_or_else(|| vec![0, 0]))
}

pub fn code_hex(code: &[u8]) -> String {
    code.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn code_from_hex(s: &str) -> Result<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return Err(Error::Parse(format!("odd-length code {s}")));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| Error::Parse(format!("bad code {s}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_edges(n: usize, edges: &[(u32, u32, f64)]) -> Mdm {
        let mut m = Mdm::new(n);
        for &(a, b, l) in edges {
            m.add_edge(a, b, l);
        }
        m
    }

    #[test]
    fn loop_unit_has_one_isomorphism() {
        let u = Mdm::loop_unit();
        assert_eq!(enumerate_isomorphisms(&u, &u, SizeCap::default()).unwrap().len(), 1);
        assert_eq!(canonical_code(&u, SizeCap::default()).unwrap(), LOOP_UNIT_CODE.to_vec());
    }

    #[test]
    fn different_sizes_not_isomorphic() {
        let a = Mdm::loop_unit();
        let b = from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        assert!(enumerate_isomorphisms(&a, &b, SizeCap::default()).unwrap().is_empty());
        assert_eq!(dg_distance(&a, &b), ExtDistance::Infinite);
    }

    #[test]
    fn parallel_pair_swaps() {
        let m = from_edges(2, &[(0, 1, 1.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let isos = enumerate_isomorphisms(&m, &m, SizeCap::default()).unwrap();
        assert_eq!(isos.len(), 2);
        assert!(isos.iter().all(|i| i.vertex_map == vec![0, 1]));
    }

    #[test]
    fn reversed_two_vertex_theta_is_isomorphic() {
        let a = from_edges(2, &[(0, 1, 1.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let b = from_edges(2, &[(1, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0)]);
        let cap = SizeCap::default();
        assert!(!enumerate_isomorphisms(&a, &b, cap).unwrap().is_empty());
        assert_eq!(canonical_code(&a, cap).unwrap(), canonical_code(&b, cap).unwrap());
    }

    #[test]
    fn distance_examples() {
        let a = Mdm::simple_loop(1.0);
        let b = Mdm::simple_loop(3.0);
        assert_eq!(dg_distance(&a, &b), ExtDistance::Finite(2.0));
        assert_eq!(dg_distance(&a, &a), ExtDistance::Finite(0.0));
        let s1 = vec![Mdm::simple_loop(2.0), Mdm::loop_unit()];
        let s2 = vec![Mdm::simple_loop(5.0)];
        assert_eq!(sequence_distance(&s1, &s2, 2), ExtDistance::Finite(3.0));
        assert_eq!(sequence_distance(&s1, &s1, 2), ExtDistance::Finite(0.0));
        let s3 = vec![Mdm::simple_loop(2.0), Mdm::loop_unit(), Mdm::simple_loop(9.0)];
        assert_eq!(sequence_distance(&s1, &s3, 2), ExtDistance::Finite(0.0));
    }

    #[test]
    fn relabeled_cycle_same_code() {
        let a = from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
        let b = from_edges(3, &[(2, 1, 1.0), (1, 0, 1.0), (0, 2, 1.0)]);
        let cap = SizeCap::default();
        assert_eq!(canonical_code(&a, cap).unwrap(), canonical_code(&b, cap).unwrap());
    }

    #[test]
    fn size_cap_enforced() {
        let mut m = Mdm::new(30);
        for i in 0..30 {
            m.add_edge(i, (i + 1) % 30, 1.0);
        }
        assert!(matches!(canonical_code(&m, SizeCap::default()), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn hex_round_trip() {
        let c = vec![1u8, 2, 255];
        assert_eq!(code_from_hex(&code_hex(&c)).unwrap(), c);
    }
}
