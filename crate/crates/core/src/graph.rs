//! Graph containers shared by every solver.
//!
//! Arc and edge ids are positions in the construction list, so the order in
//! which arcs are supplied defines the element ids of the ground set.

use std::collections::{BTreeSet, VecDeque};
use std::ops::Deref;

use crate::error::{Error, Result};

/// Directed multigraph. Parallel arcs and self-loops are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    node_count: usize,
    arcs: Vec<(usize, usize)>,
}

impl Digraph {
    pub fn new(node_count: usize, arcs: Vec<(usize, usize)>) -> Result<Self> {
        for (id, &(tail, head)) in arcs.iter().enumerate() {
            if tail >= node_count || head >= node_count {
                return Err(Error::Validation(format!(
                    "arc {id} ({tail}->{head}) references a node outside 0..{node_count}"
                )));
            }
        }
        Ok(Digraph { node_count, arcs })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arc(&self, id: usize) -> (usize, usize) {
        self.arcs[id]
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    /// Outgoing arc ids per node, in arc-id order.
    pub fn out_arcs(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.node_count];
        for (id, &(tail, _)) in self.arcs.iter().enumerate() {
            out[tail].push(id);
        }
        out
    }

    /// Incoming arc ids per node, in arc-id order.
    pub fn in_arcs(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.node_count];
        for (id, &(_, head)) in self.arcs.iter().enumerate() {
            inc[head].push(id);
        }
        inc
    }

    /// Nodes reachable from `start` using only arcs for which `allowed` holds.
    pub fn reachable_from(&self, start: usize, allowed: impl Fn(usize) -> bool) -> Vec<bool> {
        let out = self.out_arcs();
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for &a in &out[u] {
                if !allowed(a) {
                    continue;
                }
                let v = self.arcs[a].1;
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    pub fn with_extra_arcs(&self, extra: &[(usize, usize)]) -> Digraph {
        let mut arcs = self.arcs.clone();
        arcs.extend_from_slice(extra);
        Digraph { node_count: self.node_count, arcs }
    }
}

/// Bipartite graph with left nodes `0..left` and right nodes `0..right`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    left: usize,
    right: usize,
    edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (id, &(l, r)) in edges.iter().enumerate() {
            if l >= left || r >= right {
                return Err(Error::Validation(format!(
                    "edge {id} ({l},{r}) is outside the {left}x{right} bipartition"
                )));
            }
            if !seen.insert((l, r)) {
                return Err(Error::Validation(format!("duplicate edge ({l},{r})")));
            }
        }
        Ok(BipartiteGraph { left, right, edges })
    }

    pub fn left_count(&self) -> usize {
        self.left
    }

    pub fn right_count(&self) -> usize {
        self.right
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edge ids incident to each right node.
    pub fn right_incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.right];
        for (id, &(_, r)) in self.edges.iter().enumerate() {
            inc[r].push(id);
        }
        inc
    }

    /// Edge ids incident to each left node.
    pub fn left_incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.left];
        for (id, &(l, _)) in self.edges.iter().enumerate() {
            inc[l].push(id);
        }
        inc
    }
}

/// One real weight per element id. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("weight {pos} is not finite")));
        }
        Ok(WeightVector(values))
    }

    pub fn zeros(len: usize) -> Self {
        WeightVector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn negated(&self) -> WeightVector {
        WeightVector(self.0.iter().map(|v| -v).collect())
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Sorts and deduplicates an element set; returns `None` if duplicates were present.
pub fn normalize_set(ids: &[usize]) -> Option<Vec<usize>> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    let before = sorted.len();
    sorted.dedup();
    (sorted.len() == before).then_some(sorted)
}

pub fn membership(ids: &[usize], len: usize) -> Vec<bool> {
    let mut mask = vec![false; len];
    for &id in ids {
        mask[id] = true;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_dangling_arc() {
        assert!(Digraph::new(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn rejects_duplicate_bipartite_edge() {
        assert!(BipartiteGraph::new(2, 2, vec![(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn rejects_non_finite_weight() {
        assert!(WeightVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(WeightVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn reachability_respects_filter() {
        let g = Digraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.reachable_from(0, |_| true), vec![true, true, true]);
        assert_eq!(g.reachable_from(0, |a| a != 1), vec![true, true, false]);
    }

    #[test]
    fn normalize_detects_duplicates() {
        assert_eq!(normalize_set(&[3, 1, 2]), Some(vec![1, 2, 3]));
        assert_eq!(normalize_set(&[1, 1]), None);
    }
}
