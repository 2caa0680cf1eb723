//! Fenwick tree over integer weights, used for draws proportional to weight
//! without replacement.

/// Fenwick tree over nonnegative integer weights, supporting weighted draws.
#[derive(Debug, Clone)]
pub struct WeightTree {
    tree: Vec<u64>,
    total: u64,
}

impl WeightTree {
    pub fn new(weights: &[u32]) -> Self {
        let n = weights.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w as u64;
            let j = (i + 1) + ((i + 1) & (!(i + 1) + 1));
            if j <= n {
                tree[j] += tree[i + 1];
            }
        }
        let total = weights.iter().map(|&w| w as u64).sum();
        WeightTree { tree, total }
    }

    pub fn remove(&mut self, i: usize, w: u64) {
        self.total -= w;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] -= w;
            j += j & (!j + 1);
        }
    }

    /// Index whose cumulative weight interval contains `target < total`.
    pub fn find(&self, mut target: u64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0usize;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

impl WeightTree {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}
