//! Forward solvers used for prediction: maximum spanning tree, maximum
//! arborescence and maximum-weight perfect matching, each with optional
//! include/exclude constraints.

use crate::graph::{BipartiteGraph, Digraph, UnionFind};

/// Per-element constraint: `Some(true)` forces the element in, `Some(false)`
/// keeps it out.
pub type Fix = [Option<bool>];

fn allowed(fix: &Fix, e: usize) -> bool {
    fix.get(e).copied().flatten() != Some(false)
}

fn forced(fix: &Fix, e: usize) -> bool {
    fix.get(e).copied().flatten() == Some(true)
}

/// Maximum-weight spanning forest (a basis of the graphic matroid). Candidates
/// are scanned by weight descending, then id ascending, which yields the
/// lexicographically smallest optimal forest when nothing is fixed.
pub fn max_spanning_tree(nodes: usize, edges: &[(usize, usize)], w: &[f64], fix: &Fix) -> Option<Vec<usize>> {
    let mut full = UnionFind::new(nodes);
    let rank = edges.iter().filter(|&&(u, v)| full.union(u, v)).count();
    let mut uf = UnionFind::new(nodes);
    let mut tree = Vec::new();
    for (e, &(u, v)) in edges.iter().enumerate() {
        if forced(fix, e) {
            if !uf.union(u, v) {
                return None;
            }
            tree.push(e);
        }
    }
    let mut order: Vec<usize> = (0..edges.len()).filter(|&e| allowed(fix, e) && !forced(fix, e)).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    for e in order {
        let (u, v) = edges[e];
        if uf.union(u, v) {
            tree.push(e);
        }
    }
    tree.sort_unstable();
    (tree.len() == rank).then_some(tree)
}

struct Arc {
    tail: usize,
    head: usize,
    weight: f64,
    id: usize,
}

/// Chu-Liu/Edmonds on a list of arcs whose ids index the caller's arc set.
fn edmonds(n: usize, root: usize, arcs: &[Arc]) -> Option<Vec<usize>> {
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (i, a) in arcs.iter().enumerate() {
        if a.head == root || a.tail == a.head {
            continue;
        }
        if best[a.head].is_none_or(|b| a.weight > arcs[b].weight) {
            best[a.head] = Some(i);
        }
    }
    if (0..n).any(|v| v != root && best[v].is_none()) {
        return None;
    }
    // Look for a cycle among the chosen in-arcs.
    let mut color = vec![0u8; n];
    let mut cycle: Option<Vec<usize>> = None;
    'outer: for start in 0..n {
        let mut v = start;
        let mut trail = Vec::new();
        while v != root && color[v] == 0 {
            color[v] = 1;
            trail.push(v);
            v = arcs[best[v].expect("non-root nodes have an in-arc")].tail;
        }
        if v != root && color[v] == 1 {
            let pos = trail.iter().position(|&x| x == v).expect("node on current trail");
            cycle = Some(trail[pos..].to_vec());
            break 'outer;
        }
        for x in trail {
            color[x] = 2;
        }
    }
    let Some(cycle) = cycle else {
        return Some((0..n).filter(|&v| v != root).map(|v| arcs[best[v].unwrap()].id).collect());
    };
    let mut on_cycle = vec![false; n];
    for &v in &cycle {
        on_cycle[v] = true;
    }
    // Contract the cycle into a single new node.
    let mut relabel = vec![0usize; n];
    let mut next = 0;
    for v in 0..n {
        if !on_cycle[v] {
            relabel[v] = next;
            next += 1;
        }
    }
    let c = next;
    for &v in &cycle {
        relabel[v] = c;
    }
    let mut contracted = Vec::new();
    let mut origin = Vec::new();
    for (i, a) in arcs.iter().enumerate() {
        let (tu, tv) = (on_cycle[a.tail], on_cycle[a.head]);
        if tu && tv {
            continue;
        }
        let weight = if tv { a.weight - arcs[best[a.head].unwrap()].weight } else { a.weight };
        contracted.push(Arc { tail: relabel[a.tail], head: relabel[a.head], weight, id: contracted.len() });
        origin.push(i);
    }
    let chosen = edmonds(c + 1, relabel[root], &contracted)?;
    let mut out = Vec::new();
    let mut entered = None;
    for k in chosen {
        let a = &arcs[origin[k]];
        if on_cycle[a.head] {
            entered = Some(a.head);
        }
        out.push(a.id);
    }
    let entered = entered.expect("the contracted node has an in-arc");
    for &v in &cycle {
        if v != entered {
            out.push(arcs[best[v].unwrap()].id);
        }
    }
    Some(out)
}

/// Maximum-weight spanning out-tree rooted at `root`.
pub fn max_arborescence(g: &Digraph, root: usize, w: &[f64], fix: &Fix) -> Option<Vec<usize>> {
    let n = g.node_count();
    let mut pinned: Vec<Option<usize>> = vec![None; n];
    for (a, &(_, v)) in g.arcs().iter().enumerate() {
        if forced(fix, a) && (v == root || pinned[v].replace(a).is_some()) {
            return None;
        }
    }
    let arcs: Vec<Arc> = g
        .arcs()
        .iter()
        .enumerate()
        .filter(|&(a, &(_, v))| allowed(fix, a) && pinned[v].is_none_or(|p| p == a))
        .map(|(a, &(u, v))| Arc { tail: u, head: v, weight: w[a], id: a })
        .collect();
    let mut out = edmonds(n, root, &arcs)?;
    out.sort_unstable();
    Some(out)
}

/// Maximum-weight perfect matching by the Hungarian method on the dense
/// cost matrix. Missing or excluded edges are unusable.
pub fn max_perfect_matching(g: &BipartiteGraph, w: &[f64], fix: &Fix) -> Option<Vec<usize>> {
    let n = g.left_count();
    if n != g.right_count() {
        return None;
    }
    if n == 0 {
        return Some(Vec::new());
    }
    let mut edge: Vec<Vec<Option<usize>>> = vec![vec![None; n]; n];
    for (e, &(l, r)) in g.edges().iter().enumerate() {
        if allowed(fix, e) {
            edge[l][r] = Some(e);
        }
    }
    for (e, &(l, r)) in g.edges().iter().enumerate() {
        if forced(fix, e) {
            for k in 0..n {
                if k != r {
                    edge[l][k] = None;
                }
                if k != l {
                    edge[k][r] = None;
                }
            }
            if edge[l][r] != Some(e) {
                return None;
            }
        }
    }
    let span: f64 = w.iter().map(|x| x.abs()).sum::<f64>() + 1.0;
    let big = 4.0 * span * n as f64;
    let cost = |i: usize, j: usize| edge[i][j].map_or(big, |e| -w[e]);
    // Shortest augmenting paths with potentials; rows and columns are 1-based.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for j in 1..=n {
        out.push(edge[p[j] - 1][j - 1]?);
    }
    out.sort_unstable();
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matroid::{enumerate_bases, GraphicMatroid};
    use crate::oracle::{enumerate_arborescences, enumerate_perfect_matchings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weight(set: &[usize], w: &[f64]) -> f64 {
        set.iter().map(|&e| w[e]).sum()
    }

    fn best(all: &[Vec<usize>], w: &[f64]) -> f64 {
        all.iter().map(|s| weight(s, w)).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn parallel_edges_argmax() {
        assert_eq!(max_spanning_tree(2, &[(0, 1), (0, 1)], &[-1.0, 1.0], &[]), Some(vec![1]));
    }

    #[test]
    fn zero_weights_give_smallest_ids() {
        let edges = [(0, 1), (1, 2), (0, 2)];
        assert_eq!(max_spanning_tree(3, &edges, &[0.0; 3], &[]), Some(vec![0, 1]));
    }

    #[test]
    fn contraction_case() {
        // The best in-arcs of 1 and 2 form a cycle that must be broken.
        let g = Digraph::new(3, vec![(0, 1), (0, 2), (1, 2), (2, 1)]).unwrap();
        let w = [1.0, 2.0, 10.0, 10.0];
        let t = max_arborescence(&g, 0, &w, &[]).unwrap();
        assert_eq!(weight(&t, &w), 12.0);
    }

    #[test]
    fn fixes_are_respected() {
        let g = Digraph::new(3, vec![(0, 1), (0, 2), (1, 2)]).unwrap();
        let w = [1.0, 5.0, 1.0];
        assert_eq!(max_arborescence(&g, 0, &w, &[None, Some(false), None]), Some(vec![0, 2]));
        assert_eq!(max_arborescence(&g, 0, &w, &[None, None, Some(true)]), Some(vec![0, 2]));
        assert_eq!(max_arborescence(&g, 0, &w, &[Some(false), None, None]), None);
    }

    #[test]
    fn random_solvers_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(2..=5);
            let mut arcs = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.random_bool(0.6) {
                        arcs.push((u, v));
                    }
                }
            }
            let w: Vec<f64> = (0..arcs.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = Digraph::new(n, arcs.clone()).unwrap();
            let trees = enumerate_arborescences(&g, 0).unwrap();
            match max_arborescence(&g, 0, &w, &[]) {
                Some(t) => assert!((weight(&t, &w) - best(&trees, &w)).abs() < 1e-9),
                None => assert!(trees.is_empty()),
            }
            let bases = enumerate_bases(&GraphicMatroid::new(n, arcs.clone())).unwrap();
            let t = max_spanning_tree(n, &arcs, &w, &[]).unwrap();
            assert!((weight(&t, &w) - best(&bases, &w)).abs() < 1e-9);

            let edges: Vec<(usize, usize)> =
                (0..n).flat_map(|l| (0..n).map(move |r| (l, r))).filter(|_| rng.random_bool(0.7)).collect();
            let wb: Vec<f64> = (0..edges.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b = BipartiteGraph::new(n, n, edges).unwrap();
            let ms = enumerate_perfect_matchings(&b).unwrap();
            match max_perfect_matching(&b, &wb, &[]) {
                Some(m) => assert!((weight(&m, &wb) - best(&ms, &wb)).abs() < 1e-9),
                None => assert!(ms.is_empty()),
            }
        }
    }
}
