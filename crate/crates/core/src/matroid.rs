//! Matroid oracles, fundamental circuits and desk-scale basis enumeration.

use std::collections::VecDeque;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::graph::{membership, normalize_set, Digraph, UnionFind};

/// Largest ground set the enumerators will walk.
pub const ENUMERATION_LIMIT: usize = 20;

/// Independence oracle over the ground set `0..ground_size()`.
pub trait Matroid {
    fn ground_size(&self) -> usize;

    /// `set` holds distinct ids below `ground_size()`.
    fn is_independent(&self, set: &[usize]) -> bool;

    /// Structure-specific shortcut for `circuit`; `None` when unavailable.
    fn circuit_fast(&self, _basis: &[usize], _f: usize) -> Option<Vec<usize>> {
        None
    }
}

/// Cycle matroid of the underlying undirected multigraph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicMatroid {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl GraphicMatroid {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Self {
        GraphicMatroid { node_count, edges }
    }

    /// Arc directions are dropped.
    pub fn from_digraph(g: &Digraph) -> Self {
        GraphicMatroid { node_count: g.node_count(), edges: g.arcs().to_vec() }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

impl Matroid for GraphicMatroid {
    fn ground_size(&self) -> usize {
        self.edges.len()
    }

    fn is_independent(&self, set: &[usize]) -> bool {
        let mut uf = UnionFind::new(self.node_count);
        set.iter().all(|&e| {
            let (u, v) = self.edges[e];
            uf.union(u, v)
        })
    }

    fn circuit_fast(&self, basis: &[usize], f: usize) -> Option<Vec<usize>> {
        let (src, dst) = self.edges[f];
        if src == dst {
            return Some(vec![f]);
        }
        // Tree path between the endpoints of f inside the forest spanned by `basis`.
        let mut adj = vec![Vec::new(); self.node_count];
        for &e in basis {
            let (u, v) = self.edges[e];
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
        let mut via: Vec<Option<(usize, usize)>> = vec![None; self.node_count];
        let mut seen = vec![false; self.node_count];
        seen[src] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if u == dst {
                break;
            }
            for &(v, e) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    via[v] = Some((u, e));
                    queue.push_back(v);
                }
            }
        }
        if !seen[dst] {
            return None;
        }
        let mut circuit = vec![f];
        let mut cur = dst;
        while let Some((prev, e)) = via[cur] {
            circuit.push(e);
            cur = prev;
        }
        circuit.sort_unstable();
        Some(circuit)
    }
}

/// Each class may contribute at most its limit; elements in no class are free.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMatroid {
    ground_size: usize,
    classes: Vec<Vec<usize>>,
    limits: Vec<usize>,
    class_of: Vec<Option<usize>>,
}

impl PartitionMatroid {
    pub fn new(ground_size: usize, classes: Vec<Vec<usize>>, limits: Vec<usize>) -> Result<Self> {
        if classes.len() != limits.len() {
            return Err(Error::Validation(format!(
                "partition has {} classes but {} limits",
                classes.len(),
                limits.len()
            )));
        }
        let mut class_of = vec![None; ground_size];
        for (c, class) in classes.iter().enumerate() {
            for &e in class {
                if e >= ground_size {
                    return Err(Error::Validation(format!(
                        "partition class {c} names element {e} outside the ground set"
                    )));
                }
                if class_of[e].is_some() {
                    return Err(Error::Validation(format!("element {e} is in two partition classes")));
                }
                class_of[e] = Some(c);
            }
        }
        Ok(PartitionMatroid { ground_size, classes, limits, class_of })
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn limits(&self) -> &[usize] {
        &self.limits
    }
}

impl Matroid for PartitionMatroid {
    fn ground_size(&self) -> usize {
        self.ground_size
    }

    fn is_independent(&self, set: &[usize]) -> bool {
        let mut used = vec![0usize; self.limits.len()];
        for &e in set {
            if let Some(c) = self.class_of[e] {
                used[c] += 1;
                if used[c] > self.limits[c] {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformMatroid {
    ground_size: usize,
    rank: usize,
}

impl UniformMatroid {
    pub fn new(ground_size: usize, rank: usize) -> Self {
        UniformMatroid { ground_size, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

impl Matroid for UniformMatroid {
    fn ground_size(&self) -> usize {
        self.ground_size
    }

    fn is_independent(&self, set: &[usize]) -> bool {
        set.len() <= self.rank
    }
}

/// Closed set of the matroids an instance document can describe.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatroid {
    Graphic(GraphicMatroid),
    Partition(PartitionMatroid),
    Uniform(UniformMatroid),
}

impl Matroid for AnyMatroid {
    fn ground_size(&self) -> usize {
        match self {
            AnyMatroid::Graphic(m) => m.ground_size(),
            AnyMatroid::Partition(m) => m.ground_size(),
            AnyMatroid::Uniform(m) => m.ground_size(),
        }
    }

    fn is_independent(&self, set: &[usize]) -> bool {
        match self {
            AnyMatroid::Graphic(m) => m.is_independent(set),
            AnyMatroid::Partition(m) => m.is_independent(set),
            AnyMatroid::Uniform(m) => m.is_independent(set),
        }
    }

    fn circuit_fast(&self, basis: &[usize], f: usize) -> Option<Vec<usize>> {
        match self {
            AnyMatroid::Graphic(m) => m.circuit_fast(basis, f),
            AnyMatroid::Partition(m) => m.circuit_fast(basis, f),
            AnyMatroid::Uniform(m) => m.circuit_fast(basis, f),
        }
    }
}

impl<M: Matroid + ?Sized> Matroid for &M {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }

    fn is_independent(&self, set: &[usize]) -> bool {
        (**self).is_independent(set)
    }

    fn circuit_fast(&self, basis: &[usize], f: usize) -> Option<Vec<usize>> {
        (**self).circuit_fast(basis, f)
    }
}

/// Greedy rank of the whole ground set.
pub fn rank<M: Matroid + ?Sized>(m: &M) -> usize {
    let mut set = Vec::new();
    for e in 0..m.ground_size() {
        set.push(e);
        if !m.is_independent(&set) {
            set.pop();
        }
    }
    set.len()
}

fn valid_subset<M: Matroid + ?Sized>(m: &M, set: &[usize]) -> Option<Vec<usize>> {
    let sorted = normalize_set(set)?;
    sorted.iter().all(|&e| e < m.ground_size()).then_some(sorted)
}

/// Independent and not extendable by any single element.
pub fn is_basis<M: Matroid + ?Sized>(m: &M, basis: &[usize]) -> bool {
    let Some(sorted) = valid_subset(m, basis) else {
        return false;
    };
    if !m.is_independent(&sorted) {
        return false;
    }
    let inside = membership(&sorted, m.ground_size());
    let mut probe = sorted.clone();
    for f in (0..m.ground_size()).filter(|&f| !inside[f]) {
        probe.push(f);
        let independent = m.is_independent(&probe);
        probe.pop();
        if independent {
            return false;
        }
    }
    true
}

/// Unique circuit in `basis + f`, using the matroid's shortcut when it has one.
pub fn circuit<M: Matroid + ?Sized>(m: &M, basis: &[usize], f: usize) -> Result<Vec<usize>> {
    check_circuit_args(m, basis, f)?;
    match m.circuit_fast(basis, f) {
        Some(c) => Ok(c),
        None => circuit_by_oracle(m, basis, f),
    }
}

/// `{f} ∪ {e ∈ B : B − e + f independent}`, with |B| oracle calls.
pub fn circuit_by_oracle<M: Matroid + ?Sized>(m: &M, basis: &[usize], f: usize) -> Result<Vec<usize>> {
    check_circuit_args(m, basis, f)?;
    let mut with_f = basis.to_vec();
    with_f.push(f);
    if m.is_independent(&with_f) {
        return Err(Error::Precondition(format!("basis plus element {f} is independent, so the set was not a basis")));
    }
    let mut out = vec![f];
    for (i, &e) in basis.iter().enumerate() {
        let mut swapped = basis.to_vec();
        swapped[i] = f;
        if m.is_independent(&swapped) {
            out.push(e);
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn check_circuit_args<M: Matroid + ?Sized>(m: &M, basis: &[usize], f: usize) -> Result<()> {
    if f >= m.ground_size() {
        return Err(Error::Precondition(format!("element {f} is outside the ground set")));
    }
    if basis.contains(&f) {
        return Err(Error::Precondition(format!("element {f} already belongs to the basis")));
    }
    Ok(())
}

fn check_enumeration_size(n: usize) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::Guard(format!(
            "ground set of {n} elements exceeds the enumeration limit of {ENUMERATION_LIMIT}"
        )));
    }
    Ok(())
}

/// All bases in lexicographic order of their sorted id sequences.
pub fn enumerate_bases<M: Matroid + ?Sized>(m: &M) -> Result<Vec<Vec<usize>>> {
    let n = m.ground_size();
    check_enumeration_size(n)?;
    let r = rank(m);
    Ok((0..n).combinations(r).filter(|s| m.is_independent(s)).collect())
}

/// Sets that are bases of both matroids; empty when the ranks differ.
pub fn enumerate_common_bases<A, B>(m1: &A, m2: &B) -> Result<Vec<Vec<usize>>>
where
    A: Matroid + ?Sized,
    B: Matroid + ?Sized,
{
    let n = m1.ground_size();
    if m2.ground_size() != n {
        return Err(Error::Precondition(format!(
            "matroids disagree on the ground set ({} vs {})",
            n,
            m2.ground_size()
        )));
    }
    check_enumeration_size(n)?;
    let r = rank(m1);
    if rank(m2) != r {
        return Ok(Vec::new());
    }
    Ok((0..n).combinations(r).filter(|s| m1.is_independent(s) && m2.is_independent(s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Digraph;

    fn triangle() -> GraphicMatroid {
        GraphicMatroid::new(3, vec![(0, 1), (1, 2), (0, 2)])
    }

    fn k4() -> GraphicMatroid {
        let mut edges = Vec::new();
        for u in 0..4 {
            for v in (u + 1)..4 {
                edges.push((u, v));
            }
        }
        GraphicMatroid::new(4, edges)
    }

    #[test]
    fn triangle_bases() {
        let m = triangle();
        assert!(is_basis(&m, &[0, 1]));
        assert!(!is_basis(&m, &[0]));
        assert!(!is_basis(&m, &[0, 1, 2]));
        assert_eq!(enumerate_bases(&m).unwrap(), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn uniform_rank_one() {
        let m = UniformMatroid::new(2, 1);
        assert!(is_basis(&m, &[0]));
        assert_eq!(circuit(&m, &[0], 1).unwrap(), vec![0, 1]);
        assert_eq!(enumerate_bases(&m).unwrap(), vec![vec![0], vec![1]]);
    }

    #[test]
    fn triangle_circuit_is_whole_triangle() {
        assert_eq!(circuit(&triangle(), &[0, 1], 2).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn parallel_pair_circuit() {
        // a=(0,1), b=(1,2), c=(2,3), d parallel to c.
        let m = GraphicMatroid::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 2)]);
        assert_eq!(circuit(&m, &[0, 1, 2], 3).unwrap(), vec![2, 3]);
        assert_eq!(circuit_by_oracle(&m, &[0, 1, 2], 3).unwrap(), vec![2, 3]);
    }

    #[test]
    fn circuit_rejects_non_basis() {
        let m = triangle();
        assert!(matches!(circuit_by_oracle(&m, &[0], 2), Err(Error::Precondition(_))));
        assert!(matches!(circuit(&m, &[0], 2), Err(Error::Precondition(_))));
        assert!(circuit(&m, &[0, 1], 1).is_err());
    }

    #[test]
    fn k4_has_sixteen_spanning_trees() {
        assert_eq!(enumerate_bases(&k4()).unwrap().len(), 16);
    }

    #[test]
    fn enumeration_guard() {
        let m = UniformMatroid::new(21, 2);
        assert!(matches!(enumerate_bases(&m), Err(Error::Guard(_))));
    }

    #[test]
    fn arborescence_pair_common_bases() {
        // r=0, a=1, b=2; arcs r->a, r->b, a->b.
        let g = Digraph::new(3, vec![(0, 1), (0, 2), (1, 2)]).unwrap();
        let graphic = GraphicMatroid::from_digraph(&g);
        let partition = PartitionMatroid::new(3, vec![vec![0], vec![1, 2]], vec![1, 1]).unwrap();
        assert_eq!(enumerate_common_bases(&graphic, &partition).unwrap(), vec![vec![0, 1], vec![0, 2]]);
    }

    #[test]
    fn identical_pair_matches_single_enumeration() {
        let m = triangle();
        assert_eq!(enumerate_common_bases(&m, &m).unwrap(), enumerate_bases(&m).unwrap());
    }

    #[test]
    fn rank_mismatch_gives_no_common_bases() {
        let a = UniformMatroid::new(3, 1);
        let b = UniformMatroid::new(3, 2);
        assert!(enumerate_common_bases(&a, &b).unwrap().is_empty());
    }

    #[test]
    fn partition_limits_and_free_elements() {
        let m = PartitionMatroid::new(4, vec![vec![0, 1]], vec![1]).unwrap();
        assert!(m.is_independent(&[0, 2, 3]));
        assert!(!m.is_independent(&[0, 1]));
        assert!(PartitionMatroid::new(2, vec![vec![0], vec![0]], vec![1, 1]).is_err());
    }

    #[test]
    fn self_loop_is_its_own_circuit() {
        let m = GraphicMatroid::new(2, vec![(0, 1), (1, 1)]);
        assert_eq!(circuit(&m, &[0], 1).unwrap(), vec![1]);
        assert_eq!(circuit_by_oracle(&m, &[0], 1).unwrap(), vec![1]);
    }
}
