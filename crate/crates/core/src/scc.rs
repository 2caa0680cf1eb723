//! Strongly connected components of digraphs and metric multigraphs.

use crate::graph::Digraph;
use crate::mdm::Mdm;

/// Vertex partition into strongly connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccPartition {
    /// Component index of each vertex. Components are numbered in the order
    /// Tarjan's algorithm completes them (reverse topological order).
    pub comp_of: Vec<u32>,
    pub count: usize,
}

impl SccPartition {
    /// Vertex lists of the components, each sorted.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.count];
        for (v, &c) in self.comp_of.iter().enumerate() {
            out[c as usize].push(v as u32);
        }
        out
    }

    /// Canonical form: sorted list of sorted vertex sets.
    pub fn canonical_sets(&self) -> Vec<Vec<u32>> {
        let mut m = self.members();
        m.sort();
        m
    }
}

/// Iterative Tarjan over an edge list on vertices `0..n`.
pub fn tarjan(n: usize, edges: &[(u32, u32)]) -> SccPartition {
    let mut offsets = vec![0usize; n + 1];
    for &(t, _) in edges {
        offsets[t as usize + 1] += 1;
    }
    for v in 0..n {
        offsets[v + 1] += offsets[v];
    }
    let mut targets = vec![0u32; edges.len()];
    let mut fill = offsets.clone();
    for &(t, h) in edges {
        targets[fill[t as usize]] = h;
        fill[t as usize] += 1;
    }

    const UNSEEN: u32 = u32::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp_of = vec![UNSEEN; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut next_index = 0u32;
    let mut count = 0u32;

    for root in 0..n as u32 {
        if index[root as usize] != UNSEEN {
            continue;
        }
        call.push((root, offsets[root as usize]));
        index[root as usize] = next_index;
        low[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let vu = v as usize;
            if *pos < offsets[vu + 1] {
                let w = targets[*pos];
                *pos += 1;
                let wu = w as usize;
                if index[wu] == UNSEEN {
                    index[wu] = next_index;
                    low[wu] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[wu] = true;
                    call.push((w, offsets[wu]));
                } else if on_stack[wu] {
                    low[vu] = low[vu].min(index[wu]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p as usize] = low[p as usize].min(low[vu]);
                }
                if low[vu] == index[vu] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w as usize] = false;
                        comp_of[w as usize] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    SccPartition {
        comp_of,
        count: count as usize,
    }
}

/// A strongly connected component with its induced edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub vertices: Vec<u32>,
    /// Indices into the parent's edge list.
    pub edges: Vec<u32>,
}

impl Component {
    /// Nontrivial components have at least one internal edge.
    pub fn is_nontrivial(&self) -> bool {
        !self.edges.is_empty()
    }
}

/// Partition of a digraph together with each component's induced edges.
pub fn strongly_connected_components(n: usize, edges: &[(u32, u32)]) -> (SccPartition, Vec<Component>) {
    let part = tarjan(n, edges);
    let mut comps: Vec<Component> = part
        .members()
        .into_iter()
        .map(|vertices| Component {
            vertices,
            edges: Vec::new(),
        })
        .collect();
    for (e, &(t, h)) in edges.iter().enumerate() {
        let c = part.comp_of[t as usize];
        if c == part.comp_of[h as usize] {
            comps[c as usize].edges.push(e as u32);
        }
    }
    (part, comps)
}

pub fn digraph_sccs(g: &Digraph) -> (SccPartition, Vec<Component>) {
    strongly_connected_components(g.n, &g.edges)
}

pub fn mdm_sccs(m: &Mdm) -> (SccPartition, Vec<Component>) {
    let edges: Vec<(u32, u32)> = m.edges.iter().map(|e| (e.tail, e.head)).collect();
    strongly_connected_components(m.vertex_count(), &edges)
}

/// Unit-length metric multigraph induced by a component of a digraph.
pub fn component_mdm(g: &Digraph, comp: &Component) -> Mdm {
    let mut local = std::collections::HashMap::with_capacity(comp.vertices.len());
    for (i, &v) in comp.vertices.iter().enumerate() {
        local.insert(v, i as u32);
    }
    let mut m = Mdm::with_labels(comp.vertices.iter().map(|&v| v as u64).collect());
    for &e in &comp.edges {
        let (t, h) = g.edges[e as usize];
        m.add_edge(local[&t], local[&h], 1.0);
    }
    m
}

/// Sub-multigraph made of the edges of nontrivial components, with isolated
/// vertices dropped, one MDM per component.
pub fn cut_to_sccs(m: &Mdm) -> Vec<Mdm> {
    let (_, comps) = mdm_sccs(m);
    comps
        .into_iter()
        .filter(|c| c.is_nontrivial())
        .map(|c| {
            let mut local = std::collections::HashMap::new();
            for (i, &v) in c.vertices.iter().enumerate() {
                local.insert(v, i as u32);
            }
            let mut out = Mdm::with_labels(c.vertices.iter().map(|&v| m.labels[v as usize]).collect());
            for &e in &c.edges {
                let ed = m.edges[e as usize];
                out.add_edge(local[&ed.tail], local[&ed.head], ed.length);
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Kosaraju's algorithm, used as an independent oracle.
    pub(crate) fn kosaraju(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for &(t, h) in edges {
            out_adj[t as usize].push(h as usize);
            in_adj[h as usize].push(t as usize);
        }
        let mut seen = vec![false; n];
        let mut order = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut st = vec![(s, 0usize)];
            seen[s] = true;
            while let Some(&mut (v, ref mut i)) = st.last_mut() {
                if *i < out_adj[v].len() {
                    let w = out_adj[v][*i];
                    *i += 1;
                    if !seen[w] {
                        seen[w] = true;
                        st.push((w, 0));
                    }
                } else {
                    order.push(v);
                    st.pop();
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut sets = Vec::new();
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = sets.len();
            let mut set = vec![s as u32];
            comp[s] = id;
            let mut st = vec![s];
            while let Some(v) = st.pop() {
                for &w in &in_adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        set.push(w as u32);
                        st.push(w);
                    }
                }
            }
            set.sort();
            sets.push(set);
        }
        sets.sort();
        sets
    }

    #[test]
    fn edgeless_gives_singletons() {
        let p = tarjan(5, &[]);
        assert_eq!(p.count, 5);
    }

    #[test]
    fn figure_style_fixture() {
        // 17 vertices (1-based labels shifted to 0-based) with components
        // {1,2,5,17}, {3,6,8,9,14,16}, {7,11} and five singletons.
        let e = |a: u32, b: u32| (a - 1, b - 1);
        let edges = vec![
            e(1, 2), e(2, 5), e(5, 17), e(17, 1), e(2, 1),
            e(3, 6), e(6, 8), e(8, 9), e(9, 14), e(14, 16), e(16, 3), e(8, 3),
            e(7, 11), e(11, 7),
            e(5, 3), e(9, 7), e(4, 1), e(10, 4), e(12, 13), e(15, 12), e(11, 15),
        ];
        let p = tarjan(17, &edges);
        let sets = p.canonical_sets();
        let big: Vec<Vec<u32>> = sets.iter().filter(|s| s.len() > 1).cloned().collect();
        let shift = |v: &[u32]| v.iter().map(|x| x - 1).collect::<Vec<u32>>();
        assert!(big.contains(&shift(&[1, 2, 5, 17])));
        assert!(big.contains(&shift(&[3, 6, 8, 9, 14, 16])));
        assert!(big.contains(&shift(&[7, 11])));
        assert_eq!(big.len(), 3);
        assert_eq!(sets.len(), 8);
    }

    #[test]
    fn tarjan_matches_kosaraju() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(11);
        for _ in 0..50 {
            let n = 200;
            let m = rng.random_range(150..320);
            let edges: Vec<(u32, u32)> = (0..m)
                .map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32)))
                .collect();
            assert_eq!(tarjan(n, &edges).canonical_sets(), kosaraju(n, &edges));
        }
    }
}
