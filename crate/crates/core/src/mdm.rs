//! Metric directed multigraphs, smoothing and kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdmEdge {
    pub tail: u32,
    pub head: u32,
    pub length: f64,
}

/// Directed multigraph on vertices `0..labels.len()` with nonnegative edge
/// lengths. `labels` carries caller-defined identifiers (graph vertex ids,
/// step indices, ...), used only for reporting and tie-breaking.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mdm {
    pub labels: Vec<u64>,
    pub edges: Vec<MdmEdge>,
}

/// JSON form: `{"vertices":[...],"edges":[[tail,head,length],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdmJson {
    pub vertices: Vec<u64>,
    pub edges: Vec<(u64, u64, f64)>,
}

impl Mdm {
    pub fn new(vertex_count: usize) -> Self {
        Mdm {
            labels: (0..vertex_count as u64).collect(),
            edges: Vec::new(),
        }
    }

    pub fn with_labels(labels: Vec<u64>) -> Self {
        Mdm {
            labels,
            edges: Vec::new(),
        }
    }

    /// The unit object: one vertex carrying a self-loop of length zero.
    pub fn loop_unit() -> Self {
        let mut m = Mdm::new(1);
        m.add_edge(0, 0, 0.0);
        m
    }

    /// A single vertex with a self-loop of the given length.
    pub fn simple_loop(length: f64) -> Self {
        let mut m = Mdm::new(1);
        m.add_edge(0, 0, length);
        m
    }

    pub fn add_vertex(&mut self, label: u64) -> u32 {
        self.labels.push(label);
        (self.labels.len() - 1) as u32
    }

    pub fn add_edge(&mut self, tail: u32, head: u32, length: f64) {
        self.edges.push(MdmEdge { tail, head, length });
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_length(&self) -> f64 {
        crate::numerics::compensated_sum(self.edges.iter().map(|e| e.length))
    }

    pub fn is_loop_unit(&self) -> bool {
        self.labels.len() == 1 && self.edges.len() == 1 && self.edges[0].length == 0.0
    }

    pub fn degrees(&self) -> (Vec<u32>, Vec<u32>) {
        let n = self.vertex_count();
        let mut din = vec![0u32; n];
        let mut dout = vec![0u32; n];
        for e in &self.edges {
            dout[e.tail as usize] += 1;
            din[e.head as usize] += 1;
        }
        (din, dout)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertex_count() as u32;
        for e in &self.edges {
            if e.tail >= n || e.head >= n {
                return Err(Error::Inconsistent(format!("edge ({}, {}) out of range", e.tail, e.head)));
            }
            if !(e.length >= 0.0) {
                return Err(Error::Inconsistent(format!("negative edge length {}", e.length)));
            }
        }
        Ok(())
    }

    /// Single vertex with one self-loop, any length.
    pub fn is_loop(&self) -> bool {
        self.labels.len() == 1 && self.edges.len() == 1
    }

    /// Every vertex has total degree 3.
    pub fn is_three_regular(&self) -> bool {
        let (din, dout) = self.degrees();
        !din.is_empty() && din.iter().zip(&dout).all(|(a, b)| a + b == 3)
    }

    pub fn to_json(&self) -> MdmJson {
        MdmJson {
            vertices: self.labels.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| (self.labels[e.tail as usize], self.labels[e.head as usize], e.length))
                .collect(),
        }
    }

    pub fn from_json(j: &MdmJson) -> Result<Self> {
        let mut index = std::collections::HashMap::new();
        for (i, &v) in j.vertices.iter().enumerate() {
            if index.insert(v, i as u32).is_some() {
                return Err(Error::Parse(format!("duplicate vertex {v}")));
            }
        }
        let mut m = Mdm::with_labels(j.vertices.clone());
        for &(t, h, l) in &j.edges {
            let (Some(&a), Some(&b)) = (index.get(&t), index.get(&h)) else {
                return Err(Error::Parse(format!("edge ({t}, {h}) references an unknown vertex")));
            };
            m.add_edge(a, b, l);
        }
        m.validate()?;
        Ok(m)
    }

    /// Drops vertices with no incident edge and renumbers the rest.
    pub fn without_isolated(&self) -> Mdm {
        let (din, dout) = self.degrees();
        let mut map = vec![u32::MAX; self.vertex_count()];
        let mut out = Mdm::default();
        for v in 0..self.vertex_count() {
            if din[v] + dout[v] > 0 {
                map[v] = out.add_vertex(self.labels[v]);
            }
        }
        for e in &self.edges {
            out.add_edge(map[e.tail as usize], map[e.head as usize], e.length);
        }
        out
    }
}

/// Removes `w`, which must have exactly one in-edge and one out-edge that are
/// not a self-loop, replacing `u -> w -> v` by `u -> v` with the summed length.
pub fn smooth_vertex(m: &Mdm, w: u32) -> Result<Mdm> {
    let ins: Vec<usize> = (0..m.edges.len()).filter(|&e| m.edges[e].head == w).collect();
    let outs: Vec<usize> = (0..m.edges.len()).filter(|&e| m.edges[e].tail == w).collect();
    if ins.len() != 1 || outs.len() != 1 || ins[0] == outs[0] {
        return Err(Error::Precondition(format!(
            "vertex {w} is not smoothable (in {}, out {})",
            ins.len(),
            outs.len()
        )));
    }
    let a = m.edges[ins[0]];
    let b = m.edges[outs[0]];
    let mut out = Mdm::default();
    let mut map = vec![u32::MAX; m.vertex_count()];
    for v in 0..m.vertex_count() as u32 {
        if v != w {
            map[v as usize] = out.add_vertex(m.labels[v as usize]);
        }
    }
    for (i, e) in m.edges.iter().enumerate() {
        if i == ins[0] || i == outs[0] {
            continue;
        }
        out.add_edge(map[e.tail as usize], map[e.head as usize], e.length);
    }
    out.add_edge(map[a.tail as usize], map[b.head as usize], a.length + b.length);
    Ok(out)
}

/// Smooths every degree-(1,1) vertex until none is left, and turns isolated
/// vertices into copies of the unit loop.
pub fn kernel(m: &Mdm) -> Mdm {
    let n = m.vertex_count();
    let mut edges: Vec<Option<MdmEdge>> = m.edges.iter().copied().map(Some).collect();
    let mut in_e: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out_e: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in m.edges.iter().enumerate() {
        out_e[e.tail as usize].push(i);
        in_e[e.head as usize].push(i);
    }
    let mut alive = vec![true; n];
    let mut queue: std::collections::VecDeque<u32> = (0..n as u32).collect();
    let mut queued = vec![true; n];
    while let Some(w) = queue.pop_front() {
        let wu = w as usize;
        queued[wu] = false;
        if !alive[wu] || in_e[wu].len() != 1 || out_e[wu].len() != 1 || in_e[wu][0] == out_e[wu][0] {
            continue;
        }
        let ei = in_e[wu][0];
        let eo = out_e[wu][0];
        let a = edges[ei].unwrap();
        let b = edges[eo].unwrap();
        let (u, v) = (a.tail as usize, b.head as usize);
        edges[ei] = Some(MdmEdge {
            tail: a.tail,
            head: b.head,
            length: a.length + b.length,
        });
        edges[eo] = None;
        alive[wu] = false;
        in_e[wu].clear();
        out_e[wu].clear();
        // edge ei now ends at v instead of w
        let pos = in_e[v].iter().position(|&x| x == eo).unwrap();
        in_e[v][pos] = ei;
        for x in [u, v] {
            if !queued[x] && alive[x] {
                queued[x] = true;
                queue.push_back(x as u32);
            }
        }
    }
    let mut out = Mdm::default();
    let mut map = vec![u32::MAX; n];
    for v in 0..n {
        if alive[v] {
            map[v] = out.add_vertex(m.labels[v]);
        }
    }
    for e in edges.iter().flatten() {
        out.add_edge(map[e.tail as usize], map[e.head as usize], e.length);
    }
    let (din, dout) = out.degrees();
    for v in 0..out.vertex_count() {
        if din[v] + dout[v] == 0 {
            out.add_edge(v as u32, v as u32, 0.0);
        }
    }
    out
}

/// A strongly connected component prepared for ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedScc {
    pub kernel: Mdm,
    /// Vertex count before taking the kernel.
    pub size: usize,
    pub length: f64,
    /// Smallest discovery index (or other order key) of its vertices.
    pub order_key: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    Size,
    Length,
}

/// Sorts decreasingly by the chosen key (ties broken by `order_key`) and pads
/// with the unit loop up to `prefix` entries. Entries beyond `prefix` are kept.
pub fn rank_and_pad(mut sccs: Vec<RankedScc>, by: RankBy, prefix: usize) -> Vec<RankedScc> {
    sccs.sort_by(|a, b| {
        let primary = match by {
            RankBy::Size => b.size.cmp(&a.size),
            RankBy::Length => b.length.total_cmp(&a.length),
        };
        primary.then(a.order_key.cmp(&b.order_key))
    });
    while sccs.len() < prefix {
        sccs.push(RankedScc {
            kernel: Mdm::loop_unit(),
            size: 1,
            length: 0.0,
            order_key: u64::MAX,
        });
    }
    sccs
}
