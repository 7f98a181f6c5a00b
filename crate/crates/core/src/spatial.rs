//! Exact k-NN retrieval over a static point set with a median-split kd-tree.
//!
//! The tree copies the reference coordinates into leaf order and keeps the
//! original indices, so results are reported in the caller's indexing.
//! Neighbors are ordered by (squared distance, index); the index breaks ties.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dataset::{squared_distance, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Neighbors ascending by distance, ties by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborList(pub Vec<Neighbor>);

impl NeighborList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.0.iter().map(|n| n.distance).collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().map(|n| n.index).collect()
    }

    pub fn last(&self) -> Option<&Neighbor> {
        self.0.last()
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Leaf,
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    leaf_size: usize,
    /// Coordinates in leaf order.
    points: Vec<f64>,
    /// Original index of each leaf-order point.
    indices: Vec<usize>,
    nodes: Vec<Node>,
    /// Per-node tight bounding boxes, `dim` values per node.
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

/// Bounded max-heap of the best `k` candidates seen so far.
struct Best {
    k: usize,
    /// Nothing farther than this (squared) is accepted.
    limit2: f64,
    heap: BinaryHeap<Candidate>,
}

impl Best {
    fn new(k: usize, limit2: f64) -> Self {
        Best { k, limit2, heap: BinaryHeap::with_capacity(k + 1) }
    }

    #[inline]
    fn radius2(&self) -> f64 {
        if self.heap.len() < self.k {
            self.limit2
        } else {
            self.heap.peek().map_or(self.limit2, |c| c.d2)
        }
    }

    #[inline]
    fn offer(&mut self, d2: f64, index: usize) {
        if d2 > self.limit2 {
            return;
        }
        let c = Candidate { d2, index };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(top) = self.heap.peek() {
            if c < *top {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    fn into_list(self) -> NeighborList {
        let mut v = self.heap.into_vec();
        v.sort_unstable();
        NeighborList(v.into_iter().map(|c| Neighbor { index: c.index, distance: c.d2.sqrt() }).collect())
    }
}

/// Largest `d2` with `sqrt(d2) <= tau`, so that a reported distance equal to
/// `tau` passes the seeded filter.
fn squared_limit(tau: f64) -> f64 {
    let mut l = tau * tau;
    while l.sqrt() > tau {
        l = l.next_down();
    }
    while l.next_up().sqrt() <= tau && l.next_up().is_finite() {
        l = l.next_up();
    }
    l
}

/// Minimum rank below each node, for rank-filtered nearest-neighbor queries.
#[derive(Debug, Clone)]
pub struct RankFilter {
    rank: Vec<usize>,
    node_min: Vec<usize>,
}

impl KdTree {
    pub fn build(data: &Dataset) -> Result<Self> {
        KdTree::with_leaf_size(data, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(data: &Dataset, leaf_size: usize) -> Result<Self> {
        if leaf_size == 0 {
            return Err(Error::invalid("leaf size must be at least 1"));
        }
        let dim = data.dim();
        let n = data.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut tree = KdTree {
            dim,
            leaf_size,
            points: Vec::new(),
            indices: Vec::new(),
            nodes: Vec::with_capacity(2 * n / leaf_size + 1),
            lo: Vec::new(),
            hi: Vec::new(),
        };
        tree.build_node(data, &mut perm, 0, n);
        tree.points = Vec::with_capacity(n * dim);
        for &i in &perm {
            tree.points.extend_from_slice(data.point(i));
        }
        tree.indices = perm;
        Ok(tree)
    }

    fn build_node(&mut self, data: &Dataset, perm: &mut [usize], start: usize, end: usize) -> usize {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &perm[start..end] {
            let p = data.point(i);
            for j in 0..dim {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node { start, end, kind: Kind::Leaf });
        self.lo.extend_from_slice(&lo);
        self.hi.extend_from_slice(&hi);
        if end - start <= self.leaf_size {
            return id;
        }
        // Widest spread; all-duplicate ranges still split (by position) so the
        // leaf bound always holds.
        let split_dim =
            (0..dim).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a))).unwrap_or(0);
        let mid = start + (end - start) / 2;
        perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            data.point(a)[split_dim].total_cmp(&data.point(b)[split_dim])
        });
        let value = data.point(perm[mid])[split_dim];
        let left = self.build_node(data, perm, start, mid);
        let right = self.build_node(data, perm, mid, end);
        self.nodes[id].kind = Kind::Split { dim: split_dim, value, left, right };
        id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// Number of nodes on the longest root-to-leaf path, minus one.
    pub fn depth(&self) -> usize {
        fn walk(t: &KdTree, id: usize) -> usize {
            match t.nodes[id].kind {
                Kind::Leaf => 0,
                Kind::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    /// Original indices grouped per leaf, in leaf order.
    pub fn leaves(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, Kind::Leaf))
            .map(|n| self.indices[n.start..n.end].to_vec())
            .collect()
    }

    /// Checks the split invariant: left coords <= split value <= right coords.
    pub fn check_invariants(&self) -> bool {
        self.nodes.iter().all(|n| match n.kind {
            Kind::Leaf => n.end - n.start <= self.leaf_size,
            Kind::Split { dim, value, left, right } => {
                let l = &self.nodes[left];
                let r = &self.nodes[right];
                (l.start..l.end).all(|i| self.points[i * self.dim + dim] <= value)
                    && (r.start..r.end).all(|i| self.points[i * self.dim + dim] >= value)
            }
        })
    }

    #[inline]
    fn point(&self, slot: usize) -> &[f64] {
        &self.points[slot * self.dim..(slot + 1) * self.dim]
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        Ok(())
    }

    /// Exact k nearest neighbors of `q`.
    pub fn knn(&self, q: &[f64], k: usize) -> Result<NeighborList> {
        self.check_query(q)?;
        if k == 0 || k > self.len() {
            return Err(Error::KOutOfRange { k, max: self.len() });
        }
        let mut best = Best::new(k, f64::INFINITY);
        let mut off = vec![0.0; self.dim];
        self.search(0, q, 0.0, &mut off, &mut best);
        Ok(best.into_list())
    }

    /// Branch-and-bound search whose pruning radius starts at `tau` instead
    /// of infinity. Returns the (at most `k`) nearest points within `tau`,
    /// which is an approximate answer when `tau` underestimates the true
    /// k-th distance.
    pub fn knn_seeded(&self, q: &[f64], k: usize, tau: f64) -> Result<NeighborList> {
        self.check_query(q)?;
        if k == 0 || k > self.len() {
            return Err(Error::KOutOfRange { k, max: self.len() });
        }
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("initial radius {tau} must be > 0")));
        }
        let mut best = Best::new(k, squared_limit(tau));
        let mut off = vec![0.0; self.dim];
        self.search(0, q, 0.0, &mut off, &mut best);
        Ok(best.into_list())
    }

    fn search(&self, id: usize, q: &[f64], rd: f64, off: &mut [f64], best: &mut Best) {
        let node = &self.nodes[id];
        match node.kind {
            Kind::Leaf => {
                for slot in node.start..node.end {
                    let d2 = squared_distance(q, self.point(slot));
                    best.offer(d2, self.indices[slot]);
                }
            }
            Kind::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, rd, off, best);
                let old = off[dim];
                let far_rd = rd - old * old + diff * diff;
                if far_rd <= best.radius2() {
                    off[dim] = diff;
                    self.search(far, q, far_rd, off, best);
                    off[dim] = old;
                }
            }
        }
    }

    #[inline]
    fn box_min_d2(&self, id: usize, q: &[f64]) -> f64 {
        let lo = &self.lo[id * self.dim..(id + 1) * self.dim];
        let hi = &self.hi[id * self.dim..(id + 1) * self.dim];
        let mut s = 0.0;
        for j in 0..self.dim {
            let d = if q[j] < lo[j] {
                lo[j] - q[j]
            } else if q[j] > hi[j] {
                q[j] - hi[j]
            } else {
                0.0
            };
            s += d * d;
        }
        s
    }

    #[inline]
    fn box_max_d2(&self, id: usize, q: &[f64]) -> f64 {
        let lo = &self.lo[id * self.dim..(id + 1) * self.dim];
        let hi = &self.hi[id * self.dim..(id + 1) * self.dim];
        let mut s = 0.0;
        for j in 0..self.dim {
            let d = (q[j] - lo[j]).abs().max((hi[j] - q[j]).abs());
            s += d * d;
        }
        s
    }

    /// Number of points `x` with `dist(q, x) <= radius`.
    pub fn range_count(&self, q: &[f64], radius: f64) -> Result<usize> {
        self.check_query(q)?;
        if !(radius >= 0.0) {
            return Err(Error::invalid(format!("radius {radius} must be >= 0")));
        }
        Ok(self.count_node(0, q, radius * radius))
    }

    fn count_node(&self, id: usize, q: &[f64], r2: f64) -> usize {
        if self.box_min_d2(id, q) > r2 {
            return 0;
        }
        let node = &self.nodes[id];
        // Rounding is monotone, so every point's computed distance is at most
        // the computed far-corner distance.
        if self.box_max_d2(id, q) <= r2 {
            return node.end - node.start;
        }
        match node.kind {
            Kind::Leaf => self.count_leaf(node, q, r2),
            Kind::Split { left, right, .. } => self.count_node(left, q, r2) + self.count_node(right, q, r2),
        }
    }

    fn count_leaf(&self, node: &Node, q: &[f64], r2: f64) -> usize {
        (node.start..node.end).filter(|&slot| squared_distance(q, self.point(slot)) <= r2).count()
    }

    /// Precomputes subtree minima of `rank` (indexed by original point index).
    pub fn rank_filter(&self, rank: &[usize]) -> Result<RankFilter> {
        if rank.len() != self.len() {
            return Err(Error::invalid(format!("rank table has {} entries for {} points", rank.len(), self.len())));
        }
        let node_min = self
            .nodes
            .iter()
            .map(|n| self.indices[n.start..n.end].iter().map(|&i| rank[i]).min().unwrap_or(usize::MAX))
            .collect();
        Ok(RankFilter { rank: rank.to_vec(), node_min })
    }

    /// Nearest point whose rank is strictly below `below`; ties in distance
    /// go to the lower original index.
    pub fn nearest_ranked_below(&self, q: &[f64], filter: &RankFilter, below: usize) -> Result<Option<Neighbor>> {
        self.check_query(q)?;
        let mut best: Option<Candidate> = None;
        self.ranked_node(0, q, filter, below, &mut best);
        Ok(best.map(|c| Neighbor { index: c.index, distance: c.d2.sqrt() }))
    }

    fn ranked_node(&self, id: usize, q: &[f64], filter: &RankFilter, below: usize, best: &mut Option<Candidate>) {
        if filter.node_min[id] >= below {
            return;
        }
        if let Some(b) = best {
            if self.box_min_d2(id, q) > b.d2 {
                return;
            }
        }
        let node = &self.nodes[id];
        match node.kind {
            Kind::Leaf => {
                for slot in node.start..node.end {
                    let index = self.indices[slot];
                    if filter.rank[index] >= below {
                        continue;
                    }
                    let c = Candidate { d2: squared_distance(q, self.point(slot)), index };
                    if best.is_none_or(|b| c < b) {
                        *best = Some(c);
                    }
                }
            }
            Kind::Split { dim, value, left, right } => {
                let (near, far) = if q[dim] <= value { (left, right) } else { (right, left) };
                self.ranked_node(near, q, filter, below, best);
                self.ranked_node(far, q, filter, below, best);
            }
        }
    }
}

/// Brute-force k-NN, the reference the tree is checked against.
pub fn linear_scan_knn(data: &Dataset, q: &[f64], k: usize) -> Result<NeighborList> {
    data.check_dim(q)?;
    if k == 0 || k > data.len() {
        return Err(Error::KOutOfRange { k, max: data.len() });
    }
    let mut all: Vec<(f64, usize)> = data.points().enumerate().map(|(i, p)| (squared_distance(q, p), i)).collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(NeighborList(all.into_iter().take(k).map(|(d2, index)| Neighbor { index, distance: d2.sqrt() }).collect()))
}
