//! Plane forests with black and purple nodes and their encoding processes.
//!
//! Node `i` (0-based) is the node added at exploration step `i + 1`, so node
//! order is depth-first order. Per-step processes (`lukasiewicz`, `s_minus`,
//! `purple_count`, `running_min`) have one extra leading entry for step 0,
//! where every process is 0.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Black,
    Purple,
    /// Nodes of auxiliary trees grafted onto purple leaves; they carry no slots.
    Red,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestNode {
    pub parent: Option<u32>,
    pub color: Color,
    pub vertex: Option<u32>,
    pub out_degree: u32,
    pub in_degree: u32,
}

impl ForestNode {
    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }

    /// In-half-edges of this node still available to surplus edges from its
    /// own descendants: all of them at a root, all but the tree edge otherwise.
    pub fn slot_weight(&self) -> u64 {
        match self.color {
            Color::Purple | Color::Red => 0,
            Color::Black if self.parent.is_none() => self.in_degree as u64,
            Color::Black => self.in_degree.saturating_sub(1) as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutForest {
    pub nodes: Vec<ForestNode>,
    pub lukasiewicz: Vec<i64>,
    pub s_minus: Vec<i64>,
    pub purple_count: Vec<u32>,
    pub running_min: Vec<i64>,
    pub height: Vec<u32>,
    pub length_height: Vec<u64>,
    /// Index of the tree (in order of appearance) containing each node.
    pub tree_of: Vec<u32>,
    /// Number of nodes in the subtree rooted at each node, itself included.
    pub subtree_size: Vec<u32>,
}

impl OutForest {
    /// Builds the forest and all of its processes from the node list.
    pub fn from_nodes(nodes: Vec<ForestNode>) -> Self {
        let k = nodes.len();
        let mut lukasiewicz = Vec::with_capacity(k + 1);
        let mut s_minus = Vec::with_capacity(k + 1);
        let mut purple_count = Vec::with_capacity(k + 1);
        let mut running_min = Vec::with_capacity(k + 1);
        lukasiewicz.push(0i64);
        s_minus.push(0i64);
        purple_count.push(0u32);
        running_min.push(0i64);
        let mut tree_of = Vec::with_capacity(k);
        let mut trees = 0u32;
        for node in &nodes {
            let s = lukasiewicz.last().unwrap() + node.out_degree as i64 - 1;
            lukasiewicz.push(s);
            running_min.push((*running_min.last().unwrap()).min(s));
            let mut m = *s_minus.last().unwrap();
            if node.parent.is_some() {
                m -= 1;
            }
            if node.color == Color::Black {
                m += node.in_degree as i64;
            }
            s_minus.push(m);
            let p = purple_count.last().unwrap() + (node.color == Color::Purple) as u32;
            purple_count.push(p);
            match node.parent {
                None => {
                    tree_of.push(trees);
                    trees += 1;
                }
                Some(par) => tree_of.push(tree_of[par as usize]),
            }
        }
        let (height, length_height) = height_processes(&nodes);
        let mut subtree_size = vec![1u32; k];
        for i in (0..k).rev() {
            if let Some(p) = nodes[i].parent {
                subtree_size[p as usize] += subtree_size[i];
            }
        }
        OutForest {
            nodes,
            lukasiewicz,
            s_minus,
            purple_count,
            running_min,
            height,
            length_height,
            tree_of,
            subtree_size,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True when `a` is an ancestor of `b` or equal to it.
    pub fn is_ancestor_or_self(&self, a: u32, b: u32) -> bool {
        a <= b && b < a + self.subtree_size[a as usize]
    }

    /// Node ids of the strict ancestors of `node`, nearest first.
    pub fn ancestors(&self, node: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut cur = self.nodes[node as usize].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p as usize].parent;
        }
        out
    }

    /// Whether step `k` (1-based) is purple.
    pub fn is_purple_step(&self, k: usize) -> bool {
        self.nodes[k - 1].color == Color::Purple
    }

    /// Node ids of the roots.
    pub fn roots(&self) -> Vec<u32> {
        (0..self.nodes.len() as u32).filter(|&i| self.nodes[i as usize].is_root()).collect()
    }
}

/// Generation counts and slot-weighted heights recomputed from parent pointers.
///
/// The weighted height of a node is the sum of [`ForestNode::slot_weight`]
/// over its strict ancestors.
pub fn height_processes(nodes: &[ForestNode]) -> (Vec<u32>, Vec<u64>) {
    let mut height = Vec::with_capacity(nodes.len());
    let mut length_height = Vec::with_capacity(nodes.len());
    for node in nodes {
        match node.parent {
            None => {
                height.push(0);
                length_height.push(0);
            }
            Some(p) => {
                let p = p as usize;
                height.push(height[p] + 1);
                length_height.push(length_height[p] + nodes[p].slot_weight());
            }
        }
    }
    (height, length_height)
}
