//! Arborescences as graphic ∩ partition common bases, and shortest s-t paths
//! through an augmented arborescence instance.

use super::intersection::formulate_with_fixed;
use super::{check_delta, Formulation, InverseSolution, OptSense};
use crate::error::{Error, Result};
use crate::graph::{normalize_set, Digraph, UnionFind};
use crate::matroid::{GraphicMatroid, PartitionMatroid};
use crate::qp::QpSettings;

/// Graphic matroid of the underlying undirected graph and the in-arc
/// partition matroid (limit 1 per non-root node, 0 for the root).
pub fn arborescence_matroids(g: &Digraph, root: usize) -> (GraphicMatroid, PartitionMatroid) {
    let graphic = GraphicMatroid::from_digraph(g);
    let classes = g.in_arcs();
    let limits = (0..g.node_count()).map(|v| usize::from(v != root)).collect();
    let partition =
        PartitionMatroid::new(g.arc_count(), classes, limits).expect("in-arc classes partition the arc set");
    (graphic, partition)
}

/// Spanning out-tree rooted at `root`: every other node has exactly one
/// in-arc from `arcs`, the root has none, and the arcs are acyclic.
pub fn is_arborescence(g: &Digraph, root: usize, arcs: &[usize]) -> bool {
    let n = g.node_count();
    if root >= n || arcs.len() + 1 != n {
        return false;
    }
    let Some(sorted) = normalize_set(arcs) else {
        return false;
    };
    if sorted.iter().any(|&a| a >= g.arc_count()) {
        return false;
    }
    let mut indeg = vec![0usize; n];
    let mut uf = UnionFind::new(n);
    for &a in &sorted {
        let (u, v) = g.arc(a);
        indeg[v] += 1;
        if !uf.union(u, v) {
            return false;
        }
    }
    (0..n).all(|v| indeg[v] == usize::from(v != root))
}

pub fn formulate_arborescence(
    g: &Digraph,
    root: usize,
    tree: &[usize],
    delta: f64,
    sense: OptSense,
) -> Result<Formulation> {
    formulate_arborescence_fixed(g, root, tree, delta, sense, &[])
}

fn formulate_arborescence_fixed(
    g: &Digraph,
    root: usize,
    tree: &[usize],
    delta: f64,
    sense: OptSense,
    fixed: &[Option<f64>],
) -> Result<Formulation> {
    check_delta(delta)?;
    if !is_arborescence(g, root, tree) {
        return Err(Error::Precondition(format!("designated arcs do not form an arborescence rooted at {root}")));
    }
    let (graphic, partition) = arborescence_matroids(g, root);
    let s = sense.sign();
    let fixed: Vec<Option<f64>> = fixed.iter().map(|c| c.map(|c| s * c)).collect();
    let mut f = formulate_with_fixed(&graphic, &partition, tree, delta, &fixed)?;
    f.negated = sense == OptSense::Min;
    Ok(f)
}

pub fn inverse_arborescence(
    g: &Digraph,
    w: &[f64],
    root: usize,
    tree: &[usize],
    delta: f64,
    sense: OptSense,
    settings: &QpSettings,
) -> Result<InverseSolution> {
    if w.len() != g.arc_count() {
        return Err(Error::Dimension { expected: g.arc_count(), got: w.len() });
    }
    formulate_arborescence(g, root, tree, delta, sense)?.solve(w, settings)
}

/// Orders `path` as a simple directed walk from `s` to `t`.
pub fn order_path(g: &Digraph, s: usize, t: usize, path: &[usize]) -> Result<Vec<usize>> {
    let bad = |why: &str| Error::Precondition(format!("designated arcs are not a simple {s}->{t} path: {why}"));
    let n = g.node_count();
    if s >= n || t >= n {
        return Err(Error::Precondition(format!("terminals {s},{t} outside 0..{n}")));
    }
    if s == t {
        return Err(bad("source equals sink"));
    }
    let sorted = normalize_set(path).ok_or_else(|| bad("repeated arc"))?;
    if sorted.iter().any(|&a| a >= g.arc_count()) {
        return Err(bad("unknown arc"));
    }
    let mut next: Vec<Option<usize>> = vec![None; n];
    for &a in &sorted {
        let (u, _) = g.arc(a);
        if next[u].replace(a).is_some() {
            return Err(bad("branching"));
        }
    }
    let mut order = Vec::with_capacity(sorted.len());
    let mut seen = vec![false; n];
    let mut cur = s;
    seen[s] = true;
    while cur != t {
        let a = next[cur].ok_or_else(|| bad("walk stops before the sink"))?;
        order.push(a);
        cur = g.arc(a).1;
        if std::mem::replace(&mut seen[cur], true) {
            return Err(bad("repeated node"));
        }
    }
    if order.len() != sorted.len() {
        return Err(bad("arcs off the walk"));
    }
    Ok(order)
}

/// Input graph plus zero arcs `t -> v` for every `v != t`, and the designated
/// arborescence rooted at `s`: the path followed by the added arcs into
/// off-path nodes. Added arcs are numbered after the original ones.
#[derive(Debug, Clone, PartialEq)]
pub struct StPathReduction {
    pub graph: Digraph,
    pub original_arcs: usize,
    pub tree: Vec<usize>,
    pub path: Vec<usize>,
}

pub fn st_path_reduction(g: &Digraph, s: usize, t: usize, path: &[usize]) -> Result<StPathReduction> {
    let order = order_path(g, s, t, path)?;
    let n = g.node_count();
    let mut on_path = vec![false; n];
    on_path[s] = true;
    for &a in &order {
        on_path[g.arc(a).1] = true;
    }
    let added: Vec<(usize, usize)> = (0..n).filter(|&v| v != t).map(|v| (t, v)).collect();
    let graph = g.with_extra_arcs(&added);
    let m = g.arc_count();
    let mut tree = order.clone();
    for (i, &(_, v)) in added.iter().enumerate() {
        if !on_path[v] {
            tree.push(m + i);
        }
    }
    tree.sort_unstable();
    Ok(StPathReduction { graph, original_arcs: m, tree, path: order })
}

pub fn formulate_st_path(g: &Digraph, s: usize, t: usize, path: &[usize], delta: f64) -> Result<Formulation> {
    let red = st_path_reduction(g, s, t, path)?;
    let fixed: Vec<Option<f64>> = (0..red.graph.arc_count()).map(|a| (a >= red.original_arcs).then_some(0.0)).collect();
    formulate_arborescence_fixed(&red.graph, s, &red.tree, delta, OptSense::Min, &fixed)
}

pub fn inverse_st_path(
    g: &Digraph,
    w: &[f64],
    s: usize,
    t: usize,
    path: &[usize],
    delta: f64,
    settings: &QpSettings,
) -> Result<InverseSolution> {
    if w.len() != g.arc_count() {
        return Err(Error::Dimension { expected: g.arc_count(), got: w.len() });
    }
    if let Some(a) = w.iter().position(|&x| x < 0.0) {
        return Err(Error::Precondition(format!("arc {a} has negative weight")));
    }
    formulate_st_path(g, s, t, path, delta)?.solve(w, settings)
}
