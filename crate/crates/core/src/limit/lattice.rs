//! Two-dimensional integer lattices in Hermite normal form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice generated by the columns of a lower-triangular matrix
/// `[[p, 0], [r, q]]` with `p, q > 0` and `0 <= r < q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntLattice2 {
    /// Row-major generator; the lattice is spanned by its columns.
    pub generator: [[i64; 2]; 2],
    pub det: u64,
}

impl IntLattice2 {
    pub fn p(&self) -> i64 {
        self.generator[0][0]
    }

    pub fn r(&self) -> i64 {
        self.generator[1][0]
    }

    pub fn q(&self) -> i64 {
        self.generator[1][1]
    }

    /// Whether the integer point `(x, y)` lies in the lattice.
    pub fn contains(&self, x: i64, y: i64) -> bool {
        let (p, r, q) = (self.p(), self.r(), self.q());
        if x.rem_euclid(p) != 0 {
            return false;
        }
        (y - (x / p) * r).rem_euclid(q) == 0
    }

    pub fn columns(&self) -> [(i64, i64); 2] {
        let g = &self.generator;
        [(g[0][0], g[1][0]), (g[0][1], g[1][1])]
    }
}

/// Reduces a list of integer vectors to the Hermite basis of their Z-span.
fn hnf_of_span(vectors: &[(i64, i64)]) -> Result<IntLattice2> {
    // Euclid on the first coordinates, carrying the second ones along.
    let mut pivot: Option<(i64, i64)> = None;
    let mut rest: Vec<i64> = Vec::new();
    for &(x, y) in vectors {
        let (mut a, mut b) = match pivot {
            Some(v) => (v, (x, y)),
            None => {
                pivot = Some((x, y));
                continue;
            }
        };
        while b.0 != 0 {
            let t = a.0.div_euclid(b.0);
            let c = (a.0 - t * b.0, a.1 - t * b.1);
            a = b;
            b = c;
        }
        pivot = Some(a);
        rest.push(b.1);
    }
    let Some(mut piv) = pivot else {
        return Err(Error::Degenerate);
    };
    let q = rest.iter().fold(0i64, |g, &y| gcd_i64(g, y));
    if piv.0 == 0 || q == 0 {
        return Err(Error::Degenerate);
    }
    if piv.0 < 0 {
        piv = (-piv.0, -piv.1);
    }
    let r = piv.1.rem_euclid(q);
    Ok(IntLattice2 {
        generator: [[piv.0, 0], [r, q]],
        det: (piv.0 * q) as u64,
    })
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Hermite normal form of the lattice spanned by the columns of `a`.
///
/// Only column operations are used, so the result is `a * U` with `U`
/// unimodular and spans the same lattice.
pub fn hermite_normal_form(a: [[i64; 2]; 2]) -> Result<IntLattice2> {
    let det = a[0][0] as i128 * a[1][1] as i128 - a[0][1] as i128 * a[1][0] as i128;
    if det == 0 {
        return Err(Error::Singular);
    }
    hnf_of_span(&[(a[0][0], a[1][0]), (a[0][1], a[1][1])])
}

/// Smallest lattice containing `points - c` for the first point `c`.
pub fn main_lattice(points: &[(i64, i64)]) -> Result<IntLattice2> {
    let Some(&c) = points.first() else {
        return Err(Error::EmptySupport);
    };
    let diffs: Vec<(i64, i64)> = points[1..]
        .iter()
        .map(|&(x, y)| (x - c.0, y - c.1))
        .filter(|&d| d != (0, 0))
        .collect();
    hnf_of_span(&diffs)
}
