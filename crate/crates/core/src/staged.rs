//! Graph-free sampling of the explored forest, its surplus marks, candidate
//! surplus edges and the multigraphs they span.
//!
//! The forest is grown one step at a time from a stream of discovery degrees.
//! A step that pops an edge closes a surplus edge with probability equal to
//! the share of discovered unpaired in-slots among all unpaired in-slots.
//! Ancestral surplus edges are then marked with probability proportional to
//! the slot-weighted height, and within each marked tree the remaining
//! candidates and their heads are drawn sequentially.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::degree_law::{size_biased, AtomSampler, JointDegreeLaw};
use crate::error::{Error, Result};
use crate::exploration::{find_candidates_exact, Exploration, SurplusEdge};
use crate::fenwick::WeightTree;
use crate::forest::{Color, ForestNode, OutForest};
use crate::graph::DegreeSequence;
use crate::mdm::{kernel, rank_and_pad, Mdm, RankBy, RankedScc};
use crate::rng::{derive_rng, tag, SimRng};
use crate::scc::cut_to_sccs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamMode {
    /// Vertices of a fixed degree sequence in size-biased order without replacement.
    ExactReorder,
    /// Independent draws from the in-degree size-biased law.
    IidZ,
}

pub enum StreamSource<'a> {
    Sequence(&'a DegreeSequence),
    Law(&'a JointDegreeLaw),
}

enum StreamState {
    Exact {
        d_minus: Vec<u32>,
        d_plus: Vec<u32>,
        weights: WeightTree,
    },
    Iid {
        sampler: AtomSampler,
    },
}

/// Lazily produced sequence of `(in, out)` degrees in discovery order.
pub struct DiscoveryStream {
    mode: StreamMode,
    state: StreamState,
    rng: SimRng,
    emitted: usize,
}

impl DiscoveryStream {
    pub fn mode(&self) -> StreamMode {
        self.mode
    }

    /// Number of degrees emitted so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// In-degree mass not yet emitted (exact mode only).
    pub fn remaining_in_total(&self) -> Option<u64> {
        match &self.state {
            StreamState::Exact { weights, .. } => Some(weights.total()),
            StreamState::Iid { .. } => None,
        }
    }

    pub fn next_degrees(&mut self) -> Result<(u32, u32)> {
        let out = match &mut self.state {
            StreamState::Exact {
                d_minus,
                d_plus,
                weights,
            } => {
                if weights.is_empty() {
                    return Err(Error::StreamExhausted);
                }
                let i = weights.find(self.rng.random_range(0..weights.total()));
                weights.remove(i, d_minus[i] as u64);
                (d_minus[i], d_plus[i])
            }
            StreamState::Iid { sampler } => sampler.sample(&mut self.rng),
        };
        self.emitted += 1;
        Ok(out)
    }
}

pub fn stream_discovery_degrees(source: StreamSource<'_>, mode: StreamMode, seed: u64) -> Result<DiscoveryStream> {
    let rng = derive_rng(seed, &[tag::STREAM]);
    let state = match (source, mode) {
        (StreamSource::Sequence(seq), StreamMode::ExactReorder) => StreamState::Exact {
            d_minus: seq.d_minus.clone(),
            d_plus: seq.d_plus.clone(),
            weights: WeightTree::new(&seq.d_minus),
        },
        (StreamSource::Law(law), StreamMode::IidZ) => StreamState::Iid {
            sampler: size_biased(law)?.sampler(),
        },
        (StreamSource::Law(_), StreamMode::ExactReorder) => {
            return Err(Error::Precondition("exact reorder needs a degree sequence".into()))
        }
        (StreamSource::Sequence(_), StreamMode::IidZ) => {
            return Err(Error::Precondition("i.i.d. stream needs a degree law".into()))
        }
    };
    Ok(DiscoveryStream {
        mode,
        state,
        rng,
        emitted: 0,
    })
}

/// Probability that the step after step `k` closes a surplus edge, given
/// `unpaired_discovered` unpaired in-slots among discovered vertices and the
/// running minimum of the Łukasiewicz path at step `k`. Only meaningful when
/// step `k + 1` pops an edge.
pub fn surplus_probability(unpaired_discovered: u64, total_in: u64, k: u64, running_min_k: i64) -> Result<f64> {
    let unpaired_all = total_in as i64 - k as i64 - running_min_k + 1;
    if unpaired_all <= 0 {
        return Err(Error::ProbabilityOutOfRange {
            value: f64::INFINITY,
            context: format!("no unpaired in-slots left at step {k}"),
        });
    }
    let q = unpaired_discovered as f64 / unpaired_all as f64;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::ProbabilityOutOfRange {
            value: q,
            context: format!("surplus probability at step {}", k + 1),
        });
    }
    Ok(q)
}

/// Probability that a surplus edge lands on one of the `available` in-slots
/// out of `unpaired_discovered` (ancestral marks and candidate tails).
pub fn slot_hit_probability(available: u64, unpaired_discovered: u64, context: &str) -> Result<f64> {
    if unpaired_discovered == 0 {
        return Err(Error::ProbabilityOutOfRange {
            value: f64::INFINITY,
            context: context.to_string(),
        });
    }
    let p = available as f64 / unpaired_discovered as f64;
    if p > 1.0 {
        return Err(Error::ProbabilityOutOfRange {
            value: p,
            context: context.to_string(),
        });
    }
    Ok(p)
}

pub fn ancestral_probability(length_height: u64, unpaired_discovered: u64) -> Result<f64> {
    slot_hit_probability(length_height, unpaired_discovered, "ancestral mark")
}

/// Grows the forest for at most `horizon` steps, stopping early when a tree
/// finishes and the stream has nothing left.
pub fn sample_out_forest(stream: &mut DiscoveryStream, total_in: u64, horizon: usize, seed: u64) -> Result<OutForest> {
    let mut rng = derive_rng(seed, &[tag::FOREST]);
    let mut nodes: Vec<ForestNode> = Vec::with_capacity(horizon.min(1 << 24));
    // nodes that still have unexplored out-edges, with the count left
    let mut open: Vec<(u32, u32)> = Vec::new();
    let mut unpaired_discovered: u64 = 0;
    let mut s: i64 = 0;
    let mut running_min: i64 = 0;
    let exhausted_exact = |st: &DiscoveryStream| st.remaining_in_total() == Some(0);

    while nodes.len() < horizon {
        let k = nodes.len() as u64;
        let parent = match open.last_mut() {
            None => None,
            Some((node, left)) => {
                let p = *node;
                *left -= 1;
                if *left == 0 {
                    open.pop();
                }
                Some(p)
            }
        };
        let purple = match parent {
            None => {
                if exhausted_exact(stream) {
                    break;
                }
                false
            }
            Some(_) => {
                let q = surplus_probability(unpaired_discovered, total_in, k, running_min)?;
                rng.random_bool(q)
            }
        };
        let id = nodes.len() as u32;
        if purple {
            nodes.push(ForestNode {
                parent,
                color: Color::Purple,
                vertex: None,
                out_degree: 0,
                in_degree: 0,
            });
            unpaired_discovered -= 1;
            s -= 1;
        } else {
            let (din, dout) = stream.next_degrees()?;
            nodes.push(ForestNode {
                parent,
                color: Color::Black,
                vertex: None,
                out_degree: dout,
                in_degree: din,
            });
            unpaired_discovered += din as u64;
            if parent.is_some() {
                if unpaired_discovered == 0 {
                    return Err(Error::Inconsistent(format!("edge popped into a vertex of in-degree 0 at step {}", k + 1)));
                }
                unpaired_discovered -= 1;
            }
            if dout > 0 {
                open.push((id, dout));
            }
            s += dout as i64 - 1;
        }
        running_min = running_min.min(s);
    }
    Ok(OutForest::from_nodes(nodes))
}

/// Counting process of ancestral marks and the steps at which it jumps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncestralMarks {
    /// Number of marks up to each step, with a leading 0 for step 0.
    pub a_process: Vec<u32>,
    pub mark_times: Vec<usize>,
}

/// Marks purple steps independently with probability given by the
/// slot-weighted height over the discovered unpaired in-slots. Only the first
/// mark of each tree is kept: later candidates in that tree are drawn by
/// [`sample_component_candidates`].
pub fn sample_ancestral_marks(forest: &OutForest, seed: u64) -> Result<AncestralMarks> {
    let mut rng = derive_rng(seed, &[tag::MARKS]);
    let mut a_process = Vec::with_capacity(forest.len() + 1);
    a_process.push(0u32);
    let mut mark_times = Vec::new();
    let mut marked_tree: Option<u32> = None;
    for k in 1..=forest.len() {
        let node = k - 1;
        let mut a = *a_process.last().unwrap();
        if forest.nodes[node].color == Color::Purple && marked_tree != Some(forest.tree_of[node]) {
            let unpaired = forest.s_minus[k - 1];
            let p = ancestral_probability(forest.length_height[node], unpaired.max(0) as u64)?;
            if rng.random_bool(p) {
                a += 1;
                mark_times.push(k);
                marked_tree = Some(forest.tree_of[node]);
            }
        }
        a_process.push(a);
    }
    Ok(AncestralMarks { a_process, mark_times })
}

/// Steps `l + 1 ..= l + sigma` of the Łukasiewicz path spanning one tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excursion {
    pub l: usize,
    pub sigma: usize,
    /// The path ends before the tree is finished; `sigma` then runs to the end.
    pub truncated: bool,
}

/// Tree excursions containing the given marks. `lukasiewicz[0]` is step 0
/// and must sit at the start of a tree. The level of the tree containing step
/// `x` is the minimum of the path over steps before `x`; the excursion starts
/// at the first visit of that level and ends at the first step strictly below
/// it. Marks in the same excursion yield one entry.
pub fn extract_marked_excursions(lukasiewicz: &[i64], marks: &[usize]) -> Result<Vec<Excursion>> {
    let len = lukasiewicz.len().saturating_sub(1);
    let mut out: Vec<Excursion> = Vec::new();
    let mut sorted = marks.to_vec();
    sorted.sort_unstable();
    for &x in &sorted {
        if x == 0 || x > len {
            return Err(Error::MarkBeyondPath { mark: x, len });
        }
        if let Some(last) = out.last() {
            if x <= last.l + last.sigma {
                continue;
            }
        }
        let level = *lukasiewicz[..x].iter().min().unwrap();
        let l = lukasiewicz.iter().position(|&v| v == level).unwrap();
        let end = (l + 1..=len).find(|&j| lukasiewicz[j] < level);
        let exc = match end {
            Some(j) => Excursion {
                l,
                sigma: j - l,
                truncated: false,
            },
            None => Excursion {
                l,
                sigma: len - l,
                truncated: true,
            },
        };
        out.push(exc);
    }
    Ok(out)
}

/// Candidate tails of one tree, starting from its first ancestral mark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScan {
    pub tails: Vec<usize>,
    /// Entry `j` is the slot length of the subtree spanned by the tails found
    /// before step `first + j` together with that step's node.
    pub marked_tree_length: Vec<u64>,
}

/// Scans steps `first + 1 ..= end` and adds each purple step as a new
/// candidate with probability `(spanned length - candidates so far) /
/// unpaired discovered in-slots`.
pub fn sample_component_candidates<R: Rng + ?Sized>(
    forest: &OutForest,
    first: usize,
    end: usize,
    rng: &mut R,
) -> Result<CandidateScan> {
    if first == 0 || end > forest.len() || first > end {
        return Err(Error::Precondition(format!("bad candidate range {first}..={end}")));
    }
    if forest.nodes[first - 1].color != Color::Purple {
        return Err(Error::Precondition(format!("step {first} is not purple")));
    }
    let lh = &forest.length_height;
    let mut tails = vec![first];
    let mut spanned = lh[first - 1];
    let mut marked_tree_length = vec![spanned];
    // shallowest node seen since the last tail
    let mut min_height = u32::MAX;
    let mut lh_at_min = 0u64;
    for k in first + 1..=end {
        let node = k - 1;
        if forest.height[node] < min_height {
            min_height = forest.height[node];
            lh_at_min = lh[node];
        }
        let with_k = spanned + lh[node] - lh_at_min;
        marked_tree_length.push(with_k);
        if forest.nodes[node].color != Color::Purple {
            continue;
        }
        let m = tails.len() as u64;
        let available = with_k.checked_sub(m).ok_or_else(|| {
            Error::Inconsistent(format!("spanned length {with_k} below candidate count {m} at step {k}"))
        })?;
        let p = slot_hit_probability(available, forest.s_minus[k - 1].max(0) as u64, "candidate tail")?;
        if rng.random_bool(p) {
            tails.push(k);
            spanned = with_k;
            min_height = u32::MAX;
        }
    }
    Ok(CandidateScan {
        tails,
        marked_tree_length,
    })
}

/// Slot length of the subtree spanned by the strict ancestors of the given
/// nodes, computed by walking every root path.
pub fn spanned_length_brute_force(forest: &OutForest, nodes: &[u32]) -> u64 {
    let mut seen = std::collections::HashSet::new();
    let mut total = 0;
    for &v in nodes {
        for a in forest.ancestors(v) {
            if seen.insert(a) {
                total += forest.nodes[a as usize].slot_weight();
            }
        }
    }
    total
}

/// In-slot chosen as the head of a candidate surplus edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Head {
    pub node: u32,
    pub slot: u32,
}

/// Node set spanned by the candidate tails seen so far, with the slots each
/// node still has free.
#[derive(Debug, Clone, Default)]
struct SpannedSlots {
    order: Vec<u32>,
    index: HashMap<u32, usize>,
    used: Vec<Vec<bool>>,
    free: Vec<u64>,
    total_free: u64,
}

impl SpannedSlots {
    fn add_ancestors_of(&mut self, forest: &OutForest, node: u32) {
        let mut cur = forest.nodes[node as usize].parent;
        while let Some(a) = cur {
            if self.index.contains_key(&a) {
                break;
            }
            let w = forest.nodes[a as usize].slot_weight();
            self.index.insert(a, self.order.len());
            self.order.push(a);
            self.used.push(vec![false; w as usize]);
            self.free.push(w);
            self.total_free += w;
            cur = forest.nodes[a as usize].parent;
        }
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Head> {
        if self.total_free == 0 {
            return None;
        }
        let mut target = rng.random_range(0..self.total_free);
        for i in 0..self.order.len() {
            if target < self.free[i] {
                let slot = self.used[i]
                    .iter()
                    .enumerate()
                    .filter(|(_, &u)| !u)
                    .nth(target as usize)
                    .map(|(j, _)| j)
                    .unwrap();
                self.used[i][slot] = true;
                self.free[i] -= 1;
                self.total_free -= 1;
                return Some(Head {
                    node: self.order[i],
                    slot: slot as u32,
                });
            }
            target -= self.free[i];
        }
        None
    }
}

/// Head of each tail, uniform over the free in-slots of the subtree spanned
/// by that tail and the earlier ones.
pub fn sample_candidate_heads<R: Rng + ?Sized>(forest: &OutForest, tails: &[usize], rng: &mut R) -> Result<Vec<Head>> {
    let mut spanned = SpannedSlots::default();
    let mut heads = Vec::with_capacity(tails.len());
    for &t in tails {
        spanned.add_ancestors_of(forest, (t - 1) as u32);
        let h = spanned
            .draw(rng)
            .ok_or_else(|| Error::Inconsistent(format!("no free in-slot for the tail at step {t}")))?;
        heads.push(h);
    }
    Ok(heads)
}

/// Multigraph spanned by the tails: every black node on a root path of a tail,
/// unit-length tree edges, and for each tail an edge from its parent to its
/// head's node. Vertex labels are node ids.
pub fn assemble_marked_mdm(forest: &OutForest, tails: &[usize], heads: &[Head]) -> Mdm {
    if tails.is_empty() {
        return Mdm::default();
    }
    let mut nodes: Vec<u32> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &t in tails {
        for a in forest.ancestors((t - 1) as u32) {
            if !seen.insert(a) {
                break;
            }
            nodes.push(a);
        }
    }
    nodes.sort_unstable();
    let local: HashMap<u32, u32> = nodes.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
    let mut m = Mdm::with_labels(nodes.iter().map(|&v| v as u64).collect());
    for &v in &nodes {
        if let Some(p) = forest.nodes[v as usize].parent {
            m.add_edge(local[&p], local[&v], 1.0);
        }
    }
    for (&t, h) in tails.iter().zip(heads) {
        let p = forest.nodes[t - 1].parent.unwrap();
        m.add_edge(local[&p], local[&h.node], 1.0);
    }
    m
}

/// Nontrivial strongly connected components of `m` with their kernels, sorted
/// by decreasing length. Size is the vertex count before smoothing.
pub fn extract_sccs_from_marked(m: &Mdm) -> Vec<RankedScc> {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedComponent {
    pub l: usize,
    pub sigma: usize,
    pub truncated: bool,
    pub tails: Vec<usize>,
    pub heads: Vec<Head>,
    pub marked_tree_length: Vec<u64>,
    #[serde(skip)]
    pub assembled: Mdm,
    #[serde(skip)]
    pub sccs: Vec<RankedScc>,
}

#[derive(Debug, Clone)]
pub struct StagedRun {
    pub forest: OutForest,
    pub a_process: Vec<u32>,
    pub mark_times: Vec<usize>,
    pub components: Vec<MarkedComponent>,
}

impl StagedRun {
    /// All SCCs of the run, longest first.
    pub fn sccs(&self, include_truncated: bool) -> Vec<RankedScc> {
        let all = self
            .components
            .iter()
            .filter(|c| include_truncated || !c.truncated)
            .flat_map(|c| c.sccs.iter().cloned())
            .collect();
        rank_and_pad(all, RankBy::Length, 0)
    }
}

/// Full staged pipeline: forest, marks, excursions, candidates, heads and
/// SCCs. Per-tree randomness is derived from `(seed, l)` so components do not
/// depend on each other's draws.
pub fn run_staged(stream: &mut DiscoveryStream, total_in: u64, horizon: usize, seed: u64) -> Result<StagedRun> {
    let forest = sample_out_forest(stream, total_in, horizon, seed)?;
    let marks = sample_ancestral_marks(&forest, seed)?;
    let excursions = extract_marked_excursions(&forest.lukasiewicz, &marks.mark_times)?;
    let mut components = Vec::with_capacity(excursions.len());
    let mut marks_iter = marks.mark_times.iter().peekable();
    for exc in excursions {
        let end = exc.l + exc.sigma;
        let mut first = None;
        while let Some(&&x) = marks_iter.peek() {
            if x > end {
                break;
            }
            if x > exc.l && first.is_none() {
                first = Some(x);
            }
            marks_iter.next();
        }
        let first = first.ok_or_else(|| Error::Inconsistent("excursion without a mark".into()))?;
        let mut crng = derive_rng(seed, &[tag::CANDIDATES, exc.l as u64]);
        let scan = sample_component_candidates(&forest, first, end, &mut crng)?;
        let mut hrng = derive_rng(seed, &[tag::HEADS, exc.l as u64]);
        let heads = sample_candidate_heads(&forest, &scan.tails, &mut hrng)?;
        let assembled = assemble_marked_mdm(&forest, &scan.tails, &heads);
        let sccs = extract_sccs_from_marked(&assembled);
        components.push(MarkedComponent {
            l: exc.l,
            sigma: exc.sigma,
            truncated: exc.truncated,
            tails: scan.tails,
            heads,
            marked_tree_length: scan.marked_tree_length,
            assembled,
            sccs,
        });
    }
    Ok(StagedRun {
        forest,
        a_process: marks.a_process,
        mark_times: marks.mark_times,
        components,
    })
}

/// Canonical string for the explored forest together with its within-tree
/// candidates: per-step `(color, in, out)` and `(step, head node)` pairs.
pub fn outcome_code(forest: &OutForest, candidates: &[(usize, u32)]) -> String {
    use std::fmt::Write as _;
    let mut s = String::with_capacity(forest.len() * 4 + candidates.len() * 6);
    for node in &forest.nodes {
        match node.color {
            Color::Purple => s.push('p'),
            Color::Red => s.push('r'),
            Color::Black => {
                let _ = write!(s, "{}.{}", node.in_degree, node.out_degree);
            }
        }
        s.push(' ');
    }
    let mut c = candidates.to_vec();
    c.sort_unstable();
    s.push('|');
    for (k, h) in c {
        let _ = write!(s, " {k}>{h}");
    }
    s
}

pub fn staged_outcome_code(run: &StagedRun) -> String {
    let cands: Vec<(usize, u32)> = run
        .components
        .iter()
        .flat_map(|c| c.tails.iter().zip(&c.heads).map(|(&t, h)| (t, h.node)))
        .collect();
    outcome_code(&run.forest, &cands)
}

/// Candidates of a full exploration closed under heads in the tail's own
/// tree only, as `(step, head node)`. A surplus edge into an earlier tree can
/// never lie on a cycle, so chains through such edges are left out.
pub fn within_tree_candidates(x: &Exploration) -> Vec<(usize, u32)> {
    let local: Vec<SurplusEdge> = x
        .surplus
        .iter()
        .filter(|s| {
            let h = x.node_of_vertex[s.head as usize];
            x.forest.tree_of[h as usize] == x.forest.tree_of[s.step - 1]
        })
        .copied()
        .collect();
    let flags = find_candidates_exact(&x.forest, &x.node_of_vertex, &local);
    local
        .iter()
        .zip(flags)
        .filter(|(_, f)| *f)
        .map(|(s, _)| (s.step, x.node_of_vertex[s.head as usize]))
        .collect()
}

/// Same code read off a full exploration.
pub fn exploration_outcome_code(x: &Exploration) -> String {
    outcome_code(&x.forest, &within_tree_candidates(x))
}

/// Assembled multigraph of each tree holding a candidate of a full
/// exploration, built exactly as in the staged pipeline.
pub fn exploration_marked_mdms(x: &Exploration) -> Vec<Mdm> {
    let mut by_tree: std::collections::BTreeMap<u32, (Vec<usize>, Vec<Head>)> = Default::default();
    for (step, h) in within_tree_candidates(x) {
        let e = by_tree.entry(x.forest.tree_of[step - 1]).or_default();
        e.0.push(step);
        e.1.push(Head { node: h, slot: 0 });
    }
    by_tree
        .values()
        .map(|(t, h)| assemble_marked_mdm(&x.forest, t, h))
        .collect()
}

/// Forest with a red tree grafted under every purple leaf.
#[derive(Debug, Clone)]
pub struct RedAugmentation {
    pub augmented: OutForest,
    /// Index in the augmented forest of each original node.
    pub theta: Vec<usize>,
    /// Red nodes grafted under each purple leaf, in order of the leaves.
    pub red_sizes: Vec<usize>,
    /// Red trees discarded for exceeding the size cap.
    pub resamples: usize,
    pub identity_holds: bool,
}

impl RedAugmentation {
    pub fn lukasiewicz(&self) -> &[i64] {
        &self.augmented.lukasiewicz
    }
}

/// Galton-Watson tree with offspring drawn from the out-degree of `sampler`,
/// in depth-first order; `None` if it exceeds `cap` nodes.
fn red_tree<R: Rng + ?Sized>(sampler: &AtomSampler, cap: usize, rng: &mut R) -> Option<Vec<(Option<u32>, u32, u32)>> {
    let mut out: Vec<(Option<u32>, u32, u32)> = Vec::new();
    let mut open: Vec<(u32, u32)> = Vec::new();
    loop {
        let parent = match open.last_mut() {
            None if !out.is_empty() => break,
            None => None,
            Some((p, left)) => {
                let p = *p;
                *left -= 1;
                if *left == 0 {
                    open.pop();
                }
                Some(p)
            }
        };
        if out.len() >= cap {
            return None;
        }
        let (din, dout) = sampler.sample(rng);
        let id = out.len() as u32;
        out.push((parent, din, dout));
        if dout > 0 {
            open.push((id, dout));
        }
    }
    Some(out)
}

/// Identifies each purple leaf with the root of an independent red tree whose
/// offspring follow the out-degree of the size-biased law, and checks that
/// removing the red nodes and reading the rest through `theta` gives back the
/// original forest. `cap` bounds the red nodes of one tree (larger trees are
/// redrawn and counted).
pub fn augment_with_red_trees(forest: &OutForest, law: &JointDegreeLaw, cap: usize, seed: u64) -> Result<RedAugmentation> {
    let sampler = size_biased(law)?.sampler();
    let mut rng = derive_rng(seed, &[tag::RED]);
    let mut nodes: Vec<ForestNode> = Vec::with_capacity(forest.len());
    let mut theta = Vec::with_capacity(forest.len());
    let mut red_sizes = Vec::new();
    let mut resamples = 0usize;
    for node in &forest.nodes {
        let id = nodes.len();
        theta.push(id);
        let parent = node.parent.map(|p| theta[p as usize] as u32);
        if node.color != Color::Purple {
            nodes.push(ForestNode { parent, ..*node });
            continue;
        }
        let tree = loop {
            // the root of the drawn tree is the purple leaf itself
            if let Some(t) = red_tree(&sampler, cap.saturating_add(1), &mut rng) {
                break t;
            }
            resamples += 1;
        };
        nodes.push(ForestNode {
            parent,
            out_degree: tree[0].2,
            ..*node
        });
        for &(p, din, dout) in &tree[1..] {
            nodes.push(ForestNode {
                parent: p.map(|q| (q as usize + id) as u32),
                color: Color::Red,
                vertex: None,
                out_degree: dout,
                in_degree: din,
            });
        }
        red_sizes.push(tree.len() - 1);
    }
    let augmented = OutForest::from_nodes(nodes);
    let identity_holds = check_red_embedding(forest, &augmented, &theta);
    Ok(RedAugmentation {
        augmented,
        theta,
        red_sizes,
        resamples,
        identity_holds,
    })
}

/// The non-red part of `augmented`, read through `theta`, equals `forest`:
/// same colors, degrees (purple out-degrees aside), parents and heights.
pub fn check_red_embedding(forest: &OutForest, augmented: &OutForest, theta: &[usize]) -> bool {
    if theta.len() != forest.len() {
        return false;
    }
    let non_red: Vec<usize> = (0..augmented.len())
        .filter(|&i| augmented.nodes[i].color != Color::Red)
        .collect();
    if non_red != theta {
        return false;
    }
    for (i, node) in forest.nodes.iter().enumerate() {
        let a = &augmented.nodes[theta[i]];
        let parent_ok = node.parent.map(|p| theta[p as usize] as u32) == a.parent;
        let out_ok = node.color == Color::Purple || a.out_degree == node.out_degree;
        if !parent_ok
            || !out_ok
            || a.color != node.color
            || a.in_degree != node.in_degree
            || augmented.height[theta[i]] != forest.height[i]
            || augmented.length_height[theta[i]] != forest.length_height[i]
        {
            return false;
        }
    }
    true
}
