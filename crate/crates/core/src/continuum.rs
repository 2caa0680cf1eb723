//! Grid sampler for the limit object: Brownian motion with parabolic drift,
//! its reflection, Cox marks, the real trees encoded by the excursions, and
//! the strongly connected multigraphs obtained by gluing candidates to heads.
//!
//! Times are grid indices; the path is exact on the grid and Poisson
//! processes are thinned cell by cell with `Bernoulli(rate * dt)`. Every
//! thinning step refuses cells where `rate * dt > 0.5`, so a coarse grid is
//! reported instead of silently biasing the marks; halving `dt` is the way to
//! check that results are grid-stable.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::degree_law::CriticalParams;
use crate::error::{Error, Result};
use crate::mdm::{kernel, rank_and_pad, Mdm, RankBy, RankedScc};
use crate::rng::{derive_rng, tag};
use crate::scc::cut_to_sccs;

/// Largest admissible `rate * dt` in a thinned cell.
pub const MAX_CELL_PROBABILITY: f64 = 0.5;

/// Safety cap on candidates per tree; the count is almost surely finite.
pub const CANDIDATE_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub dt: f64,
    pub horizon: f64,
    pub b_hat: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub run_min: Vec<f64>,
}

impl PathGrid {
    pub fn len(&self) -> usize {
        self.b_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b_hat.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// Drifted Brownian path with standard normal increments from `noise`.
pub fn simulate_bhat_with<F: FnMut() -> f64>(drift_coeff: f64, horizon: f64, dt: f64, mut noise: F) -> Result<PathGrid> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::Precondition(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {horizon}")));
    }
    let steps = (horizon / dt).round() as usize;
    let sd = dt.sqrt();
    let mut b_hat = Vec::with_capacity(steps + 1);
    let mut r_hat = Vec::with_capacity(steps + 1);
    let mut run_min = Vec::with_capacity(steps + 1);
    let mut w = 0.0;
    let mut m = 0.0f64;
    for i in 0..=steps {
        if i > 0 {
            w += sd * noise();
        }
        let t = i as f64 * dt;
        let b = w - drift_coeff * t * t;
        m = m.min(b);
        b_hat.push(b);
        run_min.push(m);
        r_hat.push(b - m);
    }
    Ok(PathGrid {
        dt,
        horizon,
        b_hat,
        r_hat,
        run_min,
    })
}

pub fn simulate_bhat(params: &CriticalParams, horizon: f64, dt: f64, seed: u64) -> Result<PathGrid> {
    simulate_bhat_refined(params, horizon, dt, seed, 0)
}

/// Path on the grid `dt / 2^halvings` that passes through the same values as
/// `simulate_bhat(params, horizon, dt, seed)` at the multiples of `dt`: the
/// coarse Brownian increments are drawn first and each halving inserts
/// Brownian-bridge midpoints.
pub fn simulate_bhat_refined(params: &CriticalParams, horizon: f64, dt: f64, seed: u64, halvings: u32) -> Result<PathGrid> {
    if !params.has_continuum_limit() {
        return Err(Error::Degenerate);
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::Precondition(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {horizon}")));
    }
    let mut rng = derive_rng(seed, &[tag::PATH]);
    let steps = (horizon / dt).round() as usize;
    let mut inc: Vec<f64> = (0..steps).map(|_| dt.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut h = dt;
    for level in 1..=halvings {
        let mut brng = derive_rng(seed, &[tag::PATH, level as u64]);
        let sd = 0.5 * h.sqrt();
        inc = inc
            .iter()
            .flat_map(|&x| {
                let z: f64 = brng.sample(StandardNormal);
                [0.5 * x + sd * z, 0.5 * x - sd * z]
            })
            .collect();
        h *= 0.5;
    }
    let sd = h.sqrt();
    let mut it = inc.into_iter();
    simulate_bhat_with(params.drift_coeff, horizon, h, || it.next().unwrap_or(0.0) / sd)
}

fn cell_probability(rate: f64, dt: f64) -> Result<f64> {
    let p = rate * dt;
    if p > MAX_CELL_PROBABILITY {
        return Err(Error::GridTooCoarse(p));
    }
    Ok(p.max(0.0))
}

/// Grid indices of a Poisson process with the given per-cell rates, one
/// Bernoulli trial per cell.
pub fn thin_cells<R: Rng + ?Sized>(rates: impl IntoIterator<Item = (usize, f64)>, dt: f64, rng: &mut R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, rate) in rates {
        let p = cell_probability(rate, dt)?;
        if p > 0.0 && rng.random_bool(p) {
            out.push(i);
        }
    }
    Ok(out)
}

/// Marks of the Cox process with intensity `cox_coeff * r_hat`, as grid
/// indices (cell `i` covers `((i - 1) dt, i dt]`).
pub fn sample_cox(path: &PathGrid, params: &CriticalParams, seed: u64) -> Result<Vec<usize>> {
    let mut rng = derive_rng(seed, &[tag::COX]);
    let c = params.cox_coeff;
    thin_cells((1..path.len()).map(|i| (i, c * path.r_hat[i])), path.dt, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridExcursion {
    pub l: usize,
    pub sigma: usize,
    pub truncated: bool,
}

impl GridExcursion {
    pub fn end(&self) -> usize {
        self.l + self.sigma
    }
}

/// Excursion of the reflected path straddling grid index `x`.
pub fn locate_excursion(path: &PathGrid, x: usize) -> Result<GridExcursion> {
    if x >= path.len() || path.r_hat[x] <= 0.0 {
        return Err(Error::Precondition(format!("index {x} is not inside an excursion")));
    }
    let level = path.run_min[x];
    // run_min is nonincreasing: first index at or below the level, then first strictly below
    let l = path.run_min.partition_point(|&m| m > level);
    let end = path.run_min.partition_point(|&m| m >= level);
    if end >= path.len() {
        Ok(GridExcursion {
            l,
            sigma: path.len() - 1 - l,
            truncated: true,
        })
    } else {
        Ok(GridExcursion {
            l,
            sigma: end - l,
            truncated: false,
        })
    }
}

/// Range-minimum table over a slice.
#[derive(Debug, Clone)]
pub struct SparseMin {
    levels: Vec<Vec<f64>>,
}

impl SparseMin {
    pub fn new(values: &[f64]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=values.len() - 2 * width)
                .map(|i| prev[i].min(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        SparseMin { levels }
    }

    /// Minimum over the inclusive range `[a, b]`.
    pub fn min(&self, a: usize, b: usize) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let k = (usize::BITS - 1 - (b - a + 1).leading_zeros()) as usize;
        self.levels[k][a].min(self.levels[k][b + 1 - (1 << k)])
    }
}

/// Real tree encoded by `height_scale * r_hat` on one excursion.
#[derive(Debug, Clone)]
pub struct ExcursionTree {
    pub excursion: GridExcursion,
    /// Heights on `l ..= l + sigma`, indexed from `l`.
    pub f: Vec<f64>,
    rmq: SparseMin,
}

impl ExcursionTree {
    pub fn new(path: &PathGrid, excursion: GridExcursion, height_scale: f64) -> Self {
        let f: Vec<f64> = path.r_hat[excursion.l..=excursion.end()]
            .iter()
            .map(|&r| height_scale * r)
            .collect();
        let rmq = SparseMin::new(&f);
        ExcursionTree { excursion, f, rmq }
    }

    fn local(&self, s: usize) -> Result<usize> {
        if s < self.excursion.l || s > self.excursion.end() {
            return Err(Error::Precondition(format!(
                "index {s} outside [{}, {}]",
                self.excursion.l,
                self.excursion.end()
            )));
        }
        Ok(s - self.excursion.l)
    }

    pub fn height(&self, s: usize) -> Result<f64> {
        Ok(self.f[self.local(s)?])
    }

    /// Minimum height over the grid indices between `s` and `t`.
    pub fn min_between(&self, s: usize, t: usize) -> Result<f64> {
        Ok(self.rmq.min(self.local(s)?, self.local(t)?))
    }

    pub fn tree_distance(&self, s: usize, t: usize) -> Result<f64> {
        let (a, b) = (self.local(s)?, self.local(t)?);
        Ok(self.f[a] + self.f[b] - 2.0 * self.rmq.min(a, b))
    }

    /// Total length of the subtree spanned by the root and the sorted marks.
    pub fn marked_tree_length(&self, marks: &[usize]) -> Result<f64> {
        Ok(self.segments(marks)?.iter().map(|s| s.top - s.bottom).sum())
    }

    /// Decomposition of the spanned subtree into root-path pieces, one per
    /// mark: from the branch point with the previous marks up to the mark.
    pub fn segments(&self, marks: &[usize]) -> Result<Vec<Segment>> {
        let mut out = Vec::with_capacity(marks.len());
        let mut prev = self.excursion.l;
        for &t in marks {
            if t < prev {
                return Err(Error::Precondition("marks must be sorted".into()));
            }
            let bottom = self.min_between(prev, t)?;
            out.push(Segment {
                base: t,
                bottom,
                top: self.height(t)?,
            });
            prev = t;
        }
        Ok(out)
    }
}

/// Piece of the root path of grid point `base` between two heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub base: usize,
    pub bottom: f64,
    pub top: f64,
}

/// Point of the tree: the ancestor of grid point `base` at the given height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreePoint {
    pub base: usize,
    pub height: f64,
    /// Segment (by candidate rank) carrying the point.
    pub segment: usize,
}

/// Candidates after the first mark `first`: each next candidate is the first
/// point of a Poisson process of rate `coeff * |spanned tree with s|`.
pub fn sample_continuum_candidates<R: Rng + ?Sized>(
    tree: &ExcursionTree,
    first: usize,
    coeff: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let end = tree.excursion.end();
    let mut spanned = tree.height(first)?;
    let mut tails = vec![first];
    let mut min_since = f64::INFINITY;
    for s in first + 1..=end {
        let h = tree.height(s)?;
        min_since = min_since.min(h);
        let with_s = spanned + h - min_since;
        let p = cell_probability(coeff * with_s, dt)?;
        if p > 0.0 && rng.random_bool(p) {
            tails.push(s);
            if tails.len() > CANDIDATE_CAP {
                return Err(Error::Inconsistent(format!("more than {CANDIDATE_CAP} candidates in one tree")));
            }
            spanned = with_s;
            min_since = f64::INFINITY;
        }
    }
    Ok(tails)
}

/// Point at length `u` along the segments laid end to end.
pub fn point_at_length(segments: &[Segment], u: f64) -> Option<TreePoint> {
    let mut left = u;
    for (j, s) in segments.iter().enumerate() {
        let len = s.top - s.bottom;
        if left <= len {
            return Some(TreePoint {
                base: s.base,
                height: s.bottom + left,
                segment: j,
            });
        }
        left -= len;
    }
    None
}

/// Heads, each uniform on the length measure of the tree spanned by the
/// root and the tails up to its own.
pub fn sample_continuum_heads<R: Rng + ?Sized>(tree: &ExcursionTree, tails: &[usize], rng: &mut R) -> Result<Vec<TreePoint>> {
    let segments = tree.segments(tails)?;
    let mut total = 0.0;
    let mut heads = Vec::with_capacity(tails.len());
    for i in 0..tails.len() {
        total += segments[i].top - segments[i].bottom;
        if total <= 0.0 {
            return Err(Error::Degenerate);
        }
        let u = rng.random::<f64>() * total;
        heads.push(point_at_length(&segments[..=i], u).unwrap());
    }
    Ok(heads)
}

/// Vertices placed on the segments, with union-find for identifications.
///
/// On the grid a tail can sit exactly on the path of a later tail, or add a
/// segment of length zero, which never happens in the continuum. Tails are
/// therefore always separate leaf vertices, and a branch point requested at
/// the height of an existing tail or segment bottom gets its own vertex,
/// joined by a zero-length edge.
struct Skeleton {
    // per segment: (height, is_tail, vertex), sorted when edges are built
    points: Vec<Vec<(f64, bool, usize)>>,
    // segment carrying each segment's bottom (none for the first)
    attach: Vec<Option<usize>>,
    bottoms: Vec<f64>,
    vertex_count: usize,
    root: usize,
}

impl Skeleton {
    fn new(segments: &[Segment]) -> Self {
        let n = segments.len();
        let mut attach = vec![None; n];
        for j in 1..n {
            let m = segments[j].bottom;
            let mut k = j - 1;
            while segments[k].bottom > m {
                k = attach[k].expect("first segment starts at the root");
            }
            attach[j] = Some(k);
        }
        Skeleton {
            points: vec![Vec::new(); n],
            attach,
            bottoms: segments.iter().map(|s| s.bottom).collect(),
            vertex_count: 1,
            root: 0,
        }
    }

    /// Vertex at height `h` on segment `j`, created if new. Points below the
    /// bottom of a segment belong to the segment it hangs from.
    fn vertex(&mut self, mut j: usize, h: f64, is_tail: bool) -> usize {
        while !is_tail && h < self.bottoms[j] {
            match self.attach[j] {
                Some(k) => j = k,
                None => return self.root,
            }
        }
        let list = &mut self.points[j];
        match list.iter().position(|&(x, t, _)| x == h && t == is_tail) {
            Some(p) => list[p].2,
            None => {
                let v = self.vertex_count;
                self.vertex_count += 1;
                list.push((h, is_tail, v));
                v
            }
        }
    }
}

/// Spanned tree with edges directed away from the root and tree lengths,
/// heads as extra vertices, each tail identified with its head.
pub fn build_limit_mdm(tree: &ExcursionTree, tails: &[usize], heads: &[TreePoint]) -> Result<Mdm> {
    if tails.is_empty() {
        return Ok(Mdm::default());
    }
    let segments = tree.segments(tails)?;
    let mut sk = Skeleton::new(&segments);
    let mut top_vertex = Vec::with_capacity(tails.len());
    for (j, s) in segments.iter().enumerate() {
        top_vertex.push(sk.vertex(j, s.top, true));
    }
    for j in 1..segments.len() {
        let k = sk.attach[j].unwrap();
        sk.vertex(k, segments[j].bottom, false);
    }
    let head_vertex: Vec<usize> = heads.iter().map(|h| sk.vertex(h.segment, h.height, false)).collect();

    let mut parent: Vec<usize> = (0..sk.vertex_count).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (&t, &h) in top_vertex.iter().zip(&head_vertex) {
        let (a, b) = (find(&mut parent, t), find(&mut parent, h));
        if a != b {
            parent[a] = b;
        }
    }
    let mut index = vec![usize::MAX; sk.vertex_count];
    let mut m = Mdm::default();
    for v in 0..sk.vertex_count {
        let r = find(&mut parent, v);
        if index[r] == usize::MAX {
            index[r] = m.add_vertex(r as u64) as usize;
        }
    }
    let id = |p: &mut Vec<usize>, v: usize| index[find(p, v)] as u32;
    for (j, s) in segments.iter().enumerate() {
        let mut pts = sk.points[j].clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut below_h = s.bottom;
        let mut below_v = match sk.attach[j] {
            None => sk.root,
            Some(k) => sk.vertex(k, s.bottom, false),
        };
        for (h, _, v) in pts {
            let (a, b) = (id(&mut parent, below_v), id(&mut parent, v));
            m.add_edge(a, b, h - below_h);
            below_h = h;
            below_v = v;
        }
    }
    Ok(m)
}

/// Nontrivial SCCs of a limit multigraph with their kernels, longest first.
pub fn limit_sccs(m: &Mdm) -> Vec<RankedScc> {
    let sccs = cut_to_sccs(m)
        .into_iter()
        .map(|c| RankedScc {
            size: c.vertex_count(),
            length: c.total_length(),
            order_key: c.labels.iter().copied().min().unwrap_or(u64::MAX),
            kernel: kernel(&c),
        })
        .collect();
    rank_and_pad(sccs, RankBy::Length, 0)
}

#[derive(Debug, Clone)]
pub struct ContinuumComponent {
    pub excursion: GridExcursion,
    /// Cox marks falling in the excursion.
    pub cox_marks: Vec<usize>,
    pub candidates: Vec<usize>,
    pub heads: Vec<TreePoint>,
    /// Height of the tree.
    pub tree_height: f64,
    pub limit_mdm: Mdm,
    pub sccs: Vec<RankedScc>,
}

impl ContinuumComponent {
    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }
}

#[derive(Debug, Clone)]
pub struct ContinuumRun {
    pub path: PathGrid,
    pub cox_marks: Vec<usize>,
    pub components: Vec<ContinuumComponent>,
}

impl ContinuumRun {
    /// SCCs of all components, longest first.
    pub fn sccs(&self, include_truncated: bool) -> Vec<RankedScc> {
        let all = self
            .components
            .iter()
            .filter(|c| include_truncated || !c.excursion.truncated)
            .flat_map(|c| c.sccs.iter().cloned())
            .collect();
        rank_and_pad(all, RankBy::Length, 0)
    }

    pub fn largest_length(&self, include_truncated: bool) -> f64 {
        self.sccs(include_truncated).first().map_or(0.0, |s| s.length)
    }
}

/// Path, Cox marks, and for every marked tree its candidates, heads and SCCs.
pub fn run_continuum(params: &CriticalParams, horizon: f64, dt: f64, seed: u64) -> Result<ContinuumRun> {
    run_continuum_refined(params, horizon, dt, seed, 0)
}

/// As [`run_continuum`] on the grid `dt / 2^halvings`, with the Brownian path
/// coupled to the coarse one (see [`simulate_bhat_refined`]).
pub fn run_continuum_refined(params: &CriticalParams, horizon: f64, dt: f64, seed: u64, halvings: u32) -> Result<ContinuumRun> {
    let path = simulate_bhat_refined(params, horizon, dt, seed, halvings)?;
    let dt = path.dt;
    let cox_marks = sample_cox(&path, params, seed)?;
    let mut components = Vec::new();
    let mut i = 0;
    while i < cox_marks.len() {
        let excursion = locate_excursion(&path, cox_marks[i])?;
        let mut j = i;
        while j < cox_marks.len() && cox_marks[j] <= excursion.end() {
            j += 1;
        }
        let marks = cox_marks[i..j].to_vec();
        i = j;
        let tree = ExcursionTree::new(&path, excursion, params.height_scale);
        let mut rng = derive_rng(seed, &[tag::CANDIDATES, excursion.l as u64]);
        let candidates = sample_continuum_candidates(&tree, marks[0], params.candidate_coeff, dt, &mut rng)?;
        let mut hrng = derive_rng(seed, &[tag::HEADS, excursion.l as u64]);
        let heads = sample_continuum_heads(&tree, &candidates, &mut hrng)?;
        let limit_mdm = build_limit_mdm(&tree, &candidates, &heads)?;
        let sccs = limit_sccs(&limit_mdm);
        components.push(ContinuumComponent {
            excursion,
            cox_marks: marks,
            candidates,
            heads,
            tree_height: tree.f.iter().copied().fold(0.0, f64::max),
            limit_mdm,
            sccs,
        });
    }
    Ok(ContinuumRun {
        path,
        cox_marks,
        components,
    })
}

/// Kernels of the pooled SCCs over `[0, T]`, longest first, padded with the
/// unit loop to `prefix` entries.
pub fn sample_limit_sequence(params: &CriticalParams, horizon: f64, dt: f64, seed: u64, prefix: usize) -> Result<Vec<Mdm>> {
    let run = run_continuum(params, horizon, dt, seed)?;
    let mut ranked = rank_and_pad(run.sccs(true), RankBy::Length, prefix);
    ranked.truncate(prefix);
    Ok(ranked.into_iter().map(|r| r.kernel).collect())
}
