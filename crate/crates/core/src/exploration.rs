//! Edge depth-first exploration of a digraph.
//!
//! The stack holds edges. When it is empty a new root is drawn among the
//! undiscovered vertices with probability proportional to in-degree;
//! otherwise the last edge is popped. A newly discovered vertex pushes its
//! out-edges in uniformly random order. An edge whose head is already
//! discovered becomes a purple leaf under its tail.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fenwick::WeightTree;
use crate::forest::{Color, ForestNode, OutForest};
use crate::graph::{Digraph, DegreeSequence};
use crate::rng::{derive_rng, tag};
use crate::scc::digraph_sccs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    NewRoot,
    EdgePop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Discovered,
    Purple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    /// 1-based step index.
    pub k: usize,
    pub kind: StepKind,
    pub focus_vertex: u32,
    /// Edge popped at this step, if any.
    pub edge: Option<u32>,
    pub outcome: Outcome,
    pub s_minus: i64,
    pub s_plus: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationTrace {
    pub steps: Vec<Step>,
    pub discovery_order: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurplusKind {
    Ancestral,
    NonAncestral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurplusEdge {
    /// 1-based step at which the purple leaf was added.
    pub step: usize,
    pub edge: u32,
    pub tail: u32,
    pub head: u32,
    pub kind: SurplusKind,
    pub is_candidate: bool,
}

impl SurplusEdge {
    pub fn purple_node(&self) -> u32 {
        (self.step - 1) as u32
    }
}

/// Output of one exploration.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub trace: ExplorationTrace,
    pub forest: OutForest,
    pub surplus: Vec<SurplusEdge>,
    /// Node of each discovered vertex (`u32::MAX` if never discovered).
    pub node_of_vertex: Vec<u32>,
}

pub fn run_edfs(g: &Digraph, seed: u64) -> Exploration {
    let mut rng = derive_rng(seed, &[tag::EXPLORE]);
    run_edfs_with(g, &mut rng)
}

pub fn run_edfs_with<R: Rng + ?Sized>(g: &Digraph, rng: &mut R) -> Exploration {
    let n = g.n;
    let din = g.in_degrees();
    let dout = g.out_degrees();
    let adj = g.out_adjacency();
    let mut weights = WeightTree::new(&din);
    let mut node_of_vertex = vec![u32::MAX; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut steps = Vec::new();
    let mut discovery_order = Vec::new();
    let mut nodes: Vec<ForestNode> = Vec::new();
    let mut surplus = Vec::new();
    let mut s_minus: i64 = 0;
    let mut s_plus: i64 = 0;
    let mut scratch: Vec<u32> = Vec::new();

    loop {
        let (kind, w, edge, tail) = match stack.pop() {
            None => {
                if weights.total() == 0 {
                    break;
                }
                let target = rng.random_range(0..weights.total());
                let w = weights.find(target) as u32;
                s_plus -= 1;
                (StepKind::NewRoot, w, None, None)
            }
            Some(e) => {
                let (t, h) = g.edges[e as usize];
                s_minus -= 1;
                s_plus -= 1;
                (StepKind::EdgePop, h, Some(e), Some(t))
            }
        };
        let k = steps.len() + 1;
        let parent = tail.map(|t| node_of_vertex[t as usize]);
        let outcome = if node_of_vertex[w as usize] == u32::MAX {
            node_of_vertex[w as usize] = nodes.len() as u32;
            weights.remove(w as usize, din[w as usize] as u64);
            discovery_order.push(w);
            nodes.push(ForestNode {
                parent,
                color: Color::Black,
                vertex: Some(w),
                out_degree: dout[w as usize],
                in_degree: din[w as usize],
            });
            scratch.clear();
            scratch.extend_from_slice(adj.of(w as usize));
            scratch.shuffle(rng);
            stack.extend_from_slice(&scratch);
            s_minus += din[w as usize] as i64;
            s_plus += dout[w as usize] as i64;
            Outcome::Discovered
        } else {
            nodes.push(ForestNode {
                parent,
                color: Color::Purple,
                vertex: None,
                out_degree: 0,
                in_degree: 0,
            });
            surplus.push(SurplusEdge {
                step: k,
                edge: edge.expect("purple steps pop an edge"),
                tail: tail.unwrap(),
                head: w,
                kind: SurplusKind::NonAncestral,
                is_candidate: false,
            });
            Outcome::Purple
        };
        steps.push(Step {
            k,
            kind,
            focus_vertex: w,
            edge,
            outcome,
            s_minus,
            s_plus,
        });
    }

    let forest = OutForest::from_nodes(nodes);
    let mut exploration = Exploration {
        trace: ExplorationTrace {
            steps,
            discovery_order,
        },
        forest,
        surplus,
        node_of_vertex,
    };
    classify_surplus(&exploration.forest, &exploration.node_of_vertex, &mut exploration.surplus);
    let flags = find_candidates_exact(&exploration.forest, &exploration.node_of_vertex, &exploration.surplus);
    for (s, f) in exploration.surplus.iter_mut().zip(flags) {
        s.is_candidate = f;
    }
    exploration
}

/// Tags each surplus edge as ancestral when its head is an ancestor of its tail
/// or the tail itself (self-loops count as ancestral).
pub fn classify_surplus(forest: &OutForest, node_of_vertex: &[u32], surplus: &mut [SurplusEdge]) {
    for s in surplus.iter_mut() {
        let head_node = node_of_vertex[s.head as usize];
        let tail_node = forest.nodes[s.purple_node() as usize].parent.expect("purple leaves have a parent");
        s.kind = if forest.is_ancestor_or_self(head_node, tail_node) {
            SurplusKind::Ancestral
        } else {
            SurplusKind::NonAncestral
        };
        if s.kind == SurplusKind::Ancestral {
            s.is_candidate = true;
        }
    }
}

/// Least fixed point of the candidate definition: ancestral edges are
/// candidates, and so is any surplus edge whose head has a candidate's purple
/// leaf among its descendants.
pub fn find_candidates_exact(forest: &OutForest, node_of_vertex: &[u32], surplus: &[SurplusEdge]) -> Vec<bool> {
    let mut flags: Vec<bool> = surplus.iter().map(|s| s.kind == SurplusKind::Ancestral).collect();
    let len = forest.len();
    loop {
        // prefix[i] = number of candidate purple leaves among nodes < i
        let mut prefix = vec![0u32; len + 1];
        for (s, &f) in surplus.iter().zip(&flags) {
            if f {
                prefix[s.purple_node() as usize + 1] += 1;
            }
        }
        for i in 0..len {
            prefix[i + 1] += prefix[i];
        }
        let mut changed = false;
        for (i, s) in surplus.iter().enumerate() {
            if flags[i] {
                continue;
            }
            let h = node_of_vertex[s.head as usize] as usize;
            let end = h + forest.subtree_size[h] as usize;
            if prefix[end] > prefix[h] {
                flags[i] = true;
                changed = true;
            }
        }
        if !changed {
            return flags;
        }
    }
}

impl Exploration {
    /// Node created when each edge was popped (`u32::MAX` for edges never explored).
    pub fn node_of_edge(&self, edge_count: usize) -> Vec<u32> {
        let mut out = vec![u32::MAX; edge_count];
        for st in &self.trace.steps {
            if let Some(e) = st.edge {
                out[e as usize] = (st.k - 1) as u32;
            }
        }
        out
    }

    /// CSV with columns `k,kind,vertex,outcome,s_minus,s_plus,height,length_height`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("k,kind,vertex,outcome,s_minus,s_plus,height,length_height\n");
        for st in &self.trace.steps {
            let i = st.k - 1;
            let kind = match st.kind {
                StepKind::NewRoot => "new_root",
                StepKind::EdgePop => "edge_pop",
            };
            let outcome = match st.outcome {
                Outcome::Discovered => "discovered",
                Outcome::Purple => "purple",
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                st.k,
                kind,
                st.focus_vertex,
                outcome,
                st.s_minus,
                st.s_plus,
                self.forest.height[i],
                self.forest.length_height[i]
            );
        }
        s
    }

    /// Checks the Łukasiewicz identity `s_plus(k) = sum of out-degrees of the
    /// first k - P(k) discovered vertices - k` and the unpaired in-slot count
    /// at every step.
    pub fn check_step_identities(&self, seq: &DegreeSequence) -> bool {
        let mut cum_out: i64 = 0;
        let mut cum_in: i64 = 0;
        let mut discovered = 0usize;
        let mut roots: i64 = 0;
        for st in &self.trace.steps {
            if st.outcome == Outcome::Discovered {
                let v = self.trace.discovery_order[discovered] as usize;
                discovered += 1;
                cum_out += seq.d_plus[v] as i64;
                cum_in += seq.d_minus[v] as i64;
            }
            if st.kind == StepKind::NewRoot {
                roots += 1;
            }
            let k = st.k as i64;
            let purple = self.forest.purple_count[st.k] as i64;
            if discovered as i64 != k - purple {
                return false;
            }
            if st.s_plus != cum_out - k || self.forest.lukasiewicz[st.k] != st.s_plus {
                return false;
            }
            if st.s_minus != cum_in - (k - roots) || self.forest.s_minus[st.k] != st.s_minus {
                return false;
            }
        }
        true
    }

    /// Number of anomalous edges (self-loops, or repeats of an earlier explored
    /// edge with the same endpoints) among edges explored up to the discovery
    /// of the `k`-th vertex.
    pub fn anomalous_before_discovery(&self, g: &Digraph, k: usize) -> u64 {
        let mut seen = std::collections::HashSet::new();
        let mut count = 0u64;
        let mut discovered = 0usize;
        for st in &self.trace.steps {
            if st.outcome == Outcome::Discovered {
                discovered += 1;
            }
            if let Some(e) = st.edge {
                let (t, h) = g.edges[e as usize];
                if t == h || !seen.insert((t, h)) {
                    count += 1;
                }
            }
            if discovered >= k {
                break;
            }
        }
        count
    }

    /// Whether every edge of every nontrivial SCC of `g` is a candidate
    /// surplus edge or a tree edge into a node with a candidate's purple leaf
    /// in its subtree.
    pub fn sccs_consistency(&self, g: &Digraph) -> bool {
        let node_of_edge = self.node_of_edge(g.edges.len());
        let len = self.forest.len();
        let mut candidate_leaf = vec![false; len];
        for s in self.surplus.iter().filter(|s| s.is_candidate) {
            candidate_leaf[s.purple_node() as usize] = true;
        }
        let mut prefix = vec![0u32; len + 1];
        for i in 0..len {
            prefix[i + 1] = prefix[i] + candidate_leaf[i] as u32;
        }
        let (_, comps) = digraph_sccs(g);
        for c in comps.iter().filter(|c| c.is_nontrivial()) {
            for &e in &c.edges {
                let node = node_of_edge[e as usize];
                if node == u32::MAX {
                    return false;
                }
                let node = node as usize;
                if candidate_leaf[node] {
                    continue;
                }
                if self.forest.nodes[node].color == Color::Purple {
                    return false;
                }
                let end = node + self.forest.subtree_size[node] as usize;
                if prefix[end] == prefix[node] {
                    return false;
                }
            }
        }
        true
    }

    /// Whether the vertices of each SCC of `g` were all discovered in the
    /// same tree of the forest.
    pub fn sccs_in_single_trees(&self, g: &Digraph) -> bool {
        let (_, comps) = digraph_sccs(g);
        comps.iter().all(|c| {
            let trees: Vec<u32> = c
                .vertices
                .iter()
                .map(|&v| self.node_of_vertex[v as usize])
                .filter(|&n| n != u32::MAX)
                .map(|n| self.forest.tree_of[n as usize])
                .collect();
            trees.windows(2).all(|w| w[0] == w[1])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_self_loop() {
        let g = Digraph::from_edges(1, vec![(0, 0)]);
        let x = run_edfs(&g, 1);
        let st = &x.trace.steps;
        assert_eq!(st.len(), 2);
        assert_eq!(st[0].kind, StepKind::NewRoot);
        assert_eq!(st[0].s_plus, 0);
        assert_eq!(st[0].s_minus, 1);
        assert_eq!(st[1].outcome, Outcome::Purple);
        assert_eq!(st[1].s_minus, 0);
        assert_eq!(st[1].s_plus, -1);
        assert_eq!(x.forest.nodes[1].parent, Some(0));
        assert_eq!(x.surplus.len(), 1);
        assert_eq!(x.surplus[0].kind, SurplusKind::Ancestral);
    }

    #[test]
    fn edgeless_graph_is_empty() {
        let g = Digraph::from_edges(4, vec![]);
        let x = run_edfs(&g, 1);
        assert!(x.trace.steps.is_empty());
        assert!(x.forest.is_empty());
        assert!(x.sccs_consistency(&g));
    }

    #[test]
    fn two_cycle() {
        let g = Digraph::from_edges(2, vec![(0, 1), (1, 0)]);
        let x = run_edfs(&g, 5);
        assert_eq!(x.forest.len(), 3);
        assert_eq!(x.forest.nodes[1].parent, Some(0));
        assert_eq!(x.forest.nodes[2].parent, Some(1));
        assert_eq!(x.forest.nodes[2].color, Color::Purple);
        assert_eq!(x.surplus.len(), 1);
        assert_eq!(x.surplus[0].kind, SurplusKind::Ancestral);
        assert!(x.surplus[0].is_candidate);
        assert!(x.sccs_consistency(&g));
    }

    #[test]
    fn dag_has_no_candidates() {
        let g = Digraph::from_edges(4, vec![(0, 1), (0, 2), (1, 3), (2, 3), (0, 3)]);
        for seed in 0..20 {
            let x = run_edfs(&g, seed);
            assert!(x.surplus.iter().all(|s| !s.is_candidate));
        }
    }

    #[test]
    fn fixed_point_needs_two_passes() {
        // Forest (node ids): 0 -> 1 -> 2 -> purple 3 (points to 1), and
        // 0 -> 4 -> purple 5 (points to 1's sibling chain head 2).
        let nodes = vec![
            ForestNode { parent: None, color: Color::Black, vertex: Some(0), out_degree: 2, in_degree: 1 },
            ForestNode { parent: Some(0), color: Color::Black, vertex: Some(1), out_degree: 1, in_degree: 2 },
            ForestNode { parent: Some(1), color: Color::Black, vertex: Some(2), out_degree: 1, in_degree: 2 },
            ForestNode { parent: Some(2), color: Color::Purple, vertex: None, out_degree: 0, in_degree: 0 },
            ForestNode { parent: Some(0), color: Color::Black, vertex: Some(3), out_degree: 1, in_degree: 1 },
            ForestNode { parent: Some(4), color: Color::Purple, vertex: None, out_degree: 0, in_degree: 0 },
        ];
        let forest = OutForest::from_nodes(nodes);
        let node_of_vertex = vec![0, 1, 2, 4];
        let mut surplus = vec![
            SurplusEdge { step: 4, edge: 0, tail: 2, head: 1, kind: SurplusKind::NonAncestral, is_candidate: false },
            SurplusEdge { step: 6, edge: 1, tail: 3, head: 2, kind: SurplusKind::NonAncestral, is_candidate: false },
        ];
        classify_surplus(&forest, &node_of_vertex, &mut surplus);
        assert_eq!(surplus[0].kind, SurplusKind::Ancestral);
        assert_eq!(surplus[1].kind, SurplusKind::NonAncestral);
        let flags = find_candidates_exact(&forest, &node_of_vertex, &surplus);
        assert_eq!(flags, vec![true, true]);
    }
}
