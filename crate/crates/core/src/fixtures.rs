//! Hand-checked golden instances and seeded random instance generators.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::graph::{BipartiteGraph, Digraph, UnionFind, WeightVector};
use crate::instance::{Instance, Kind, Structure};
use crate::inverse::flow::FlowNetwork;
use crate::inverse::OptSense;
use crate::learn::{FeaturizedExample, Problem};
use crate::matroid::{enumerate_common_bases, rank, AnyMatroid, GraphicMatroid, PartitionMatroid, UniformMatroid};
use crate::oracle::{enumerate_arborescences, enumerate_perfect_matchings, enumerate_simple_paths};

/// An instance with its closed-form answer.
#[derive(Debug, Clone)]
pub struct Golden {
    pub name: &'static str,
    pub instance: Instance,
    pub weights: Vec<f64>,
    pub objective: f64,
}

fn inst(structure: Structure, w: &[f64], designated: &[usize], delta: f64) -> Instance {
    Instance::new(structure, WeightVector::new(w.to_vec()).expect("finite"), designated.to_vec(), delta)
        .expect("golden instances are valid")
}

fn digraph(n: usize, arcs: &[(usize, usize)]) -> Digraph {
    Digraph::new(n, arcs.to_vec()).expect("golden graphs are valid")
}

pub fn two_edge_matroid() -> Instance {
    let m = AnyMatroid::Graphic(GraphicMatroid::new(2, vec![(0, 1), (0, 1)]));
    inst(Structure::Matroid(m), &[1.0, 2.0], &[0], 1.0)
}

/// Edges a=(0,1), b=(1,2), c=(0,2).
pub fn triangle_matroid(delta: f64) -> Instance {
    let m = AnyMatroid::Graphic(GraphicMatroid::new(3, vec![(0, 1), (1, 2), (0, 2)]));
    inst(Structure::Matroid(m), &[3.0, 2.0, 1.0], &[0, 1], delta)
}

pub fn two_by_two_matching(delta: f64) -> Instance {
    let g = BipartiteGraph::new(2, 2, vec![(0, 0), (0, 1), (1, 0), (1, 1)]).expect("valid");
    inst(Structure::PerfectMatching(g), &[2.0, 1.0, 1.0, 2.0], &[0, 3], delta)
}

/// Three unit arcs s->a with costs (1,3,2) feeding a bottleneck a->t of capacity 2.
pub fn bottleneck_flow() -> Instance {
    let g = digraph(3, &[(0, 1), (0, 1), (0, 1), (1, 2)]);
    let net = FlowNetwork::new(g, vec![1.0, 1.0, 1.0, 2.0], vec![1.0, 1.0, 0.0, 2.0], 0, 2).expect("valid");
    inst(Structure::MinCostFlow(net), &[1.0, 3.0, 2.0, 1.0], &[0, 1, 3], 0.0)
}

/// r->a, a->b and the shortcut r->b.
pub fn chain_with_shortcut() -> Instance {
    let g = digraph(3, &[(0, 1), (1, 2), (0, 2)]);
    inst(Structure::SpTree { graph: g, root: 0 }, &[1.0, 1.0, 1.5], &[0, 1], 1.0)
}

/// s=0, a=1, b=2, t=3 with arcs s->a, a->t, s->b, b->t.
pub fn diamond_path() -> Instance {
    let g = digraph(4, &[(0, 1), (1, 3), (0, 2), (2, 3)]);
    inst(Structure::StPath { graph: g, source: 0, sink: 3 }, &[1.0; 4], &[0, 1], 1.0)
}

/// r=0, a=1, b=2 with arcs r->a, r->b, a->b.
pub fn three_node_arborescence(w: &[f64], tree: &[usize], delta: f64, sense: OptSense) -> Instance {
    let g = digraph(3, &[(0, 1), (0, 2), (1, 2)]);
    inst(Structure::Arborescence { graph: g, root: 0, sense }, w, tree, delta)
}

pub fn goldens() -> Vec<Golden> {
    vec![
        Golden { name: "matroid two-edge", instance: two_edge_matroid(), weights: vec![2.0, 1.0], objective: 2.0 },
        Golden { name: "triangle", instance: triangle_matroid(2.0), weights: vec![3.0, 2.5, 0.5], objective: 0.5 },
        Golden {
            name: "matching 2x2",
            instance: two_by_two_matching(3.0),
            weights: vec![2.25, 0.75, 0.75, 2.25],
            objective: 0.25,
        },
        Golden {
            name: "flow bottleneck",
            instance: bottleneck_flow(),
            weights: vec![1.0, 2.5, 2.5, 1.0],
            objective: 0.5,
        },
        Golden {
            name: "sp-tree shortcut",
            instance: chain_with_shortcut(),
            weights: vec![0.5, 0.5, 2.0],
            objective: 0.75,
        },
        Golden {
            name: "s-t diamond",
            instance: diamond_path(),
            weights: vec![0.75, 0.75, 1.25, 1.25],
            objective: 0.25,
        },
    ]
}

/// Random simple digraph: each ordered pair `u != v` is an arc with probability `density`.
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, density: f64) -> Digraph {
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(density) {
                arcs.push((u, v));
            }
        }
    }
    Digraph::new(n, arcs).expect("arcs are in range")
}

fn weights<R: Rng>(rng: &mut R, m: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(lo..hi)).collect()
}

fn build<R: Rng>(rng: &mut R, structure: Structure, designated: Vec<usize>, nonneg: bool) -> Instance {
    let m = structure.element_count();
    let w = if nonneg { weights(rng, m, 0.0, 3.0) } else { weights(rng, m, -3.0, 3.0) };
    let delta = rng.random_range(0.0..2.0);
    Instance::new(structure, WeightVector::new(w).expect("finite"), designated, delta)
        .expect("generated instances are valid")
}

pub fn random_matroid<R: Rng>(rng: &mut R) -> Instance {
    let m = match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(2..=5);
            let count = rng.random_range(1..=10);
            let edges: Vec<(usize, usize)> =
                (0..count).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
            AnyMatroid::Graphic(GraphicMatroid::new(n, edges))
        }
        1 => {
            let ground = rng.random_range(2..=8);
            let k = rng.random_range(1..=3);
            let mut classes = vec![Vec::new(); k];
            for e in 0..ground {
                classes[rng.random_range(0..k)].push(e);
            }
            let limits = classes.iter().map(|c| rng.random_range(0..=c.len())).collect();
            AnyMatroid::Partition(PartitionMatroid::new(ground, classes, limits).expect("valid partition"))
        }
        _ => {
            let ground = rng.random_range(1..=7);
            AnyMatroid::Uniform(UniformMatroid::new(ground, rng.random_range(0..=ground)))
        }
    };
    let basis = random_basis(rng, &m);
    build(rng, Structure::Matroid(m), basis, false)
}

fn random_basis<R: Rng, M: crate::matroid::Matroid>(rng: &mut R, m: &M) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m.ground_size()).collect();
    order.shuffle(rng);
    let mut basis = Vec::new();
    for e in order {
        basis.push(e);
        if !m.is_independent(&basis) {
            basis.pop();
        }
    }
    basis.sort_unstable();
    basis
}

fn random_small_matroid<R: Rng>(rng: &mut R, ground: usize) -> AnyMatroid {
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(2..=4);
            let edges = (0..ground).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
            AnyMatroid::Graphic(GraphicMatroid::new(n, edges))
        }
        1 => {
            let k = rng.random_range(1..=4);
            let mut classes = vec![Vec::new(); k];
            for e in 0..ground {
                classes[rng.random_range(0..k)].push(e);
            }
            let limits = classes.iter().map(|c: &Vec<usize>| rng.random_range(0..=c.len().min(2))).collect();
            AnyMatroid::Partition(PartitionMatroid::new(ground, classes, limits).expect("valid partition"))
        }
        _ => AnyMatroid::Uniform(UniformMatroid::new(ground, rng.random_range(0..=ground.min(4)))),
    }
}

pub fn random_intersection<R: Rng>(rng: &mut R) -> Instance {
    loop {
        let ground = rng.random_range(2..=8);
        let m1 = random_small_matroid(rng, ground);
        let m2 = random_small_matroid(rng, ground);
        if rank(&m1) != rank(&m2) {
            continue;
        }
        let common = enumerate_common_bases(&m1, &m2).expect("ground set within limits");
        if let Some(b) = common.choose(rng) {
            let b = b.clone();
            return build(rng, Structure::Intersection(m1, m2), b, false);
        }
    }
}

pub fn random_arborescence<R: Rng>(rng: &mut R) -> Instance {
    loop {
        let n = rng.random_range(2..=5);
        let density = rng.random_range(0.3..0.8);
        let g = random_digraph(rng, n, density);
        let trees = enumerate_arborescences(&g, 0).expect("small graph");
        if let Some(t) = trees.choose(rng) {
            let t = t.clone();
            let sense = if rng.random_bool(0.5) { OptSense::Max } else { OptSense::Min };
            return build(rng, Structure::Arborescence { graph: g, root: 0, sense }, t, false);
        }
    }
}

pub fn random_st_path<R: Rng>(rng: &mut R) -> Instance {
    loop {
        let n = rng.random_range(2..=5);
        let density = rng.random_range(0.3..0.8);
        let g = random_digraph(rng, n, density);
        let paths = enumerate_simple_paths(&g, 0, n - 1).expect("small graph");
        if let Some(p) = paths.choose(rng) {
            let p = p.clone();
            return build(rng, Structure::StPath { graph: g, source: 0, sink: n - 1 }, p, true);
        }
    }
}

pub fn random_matching<R: Rng>(rng: &mut R, max_side: usize) -> Instance {
    loop {
        let n = rng.random_range(1..=max_side);
        let density = rng.random_range(0.4..0.9);
        let edges: Vec<(usize, usize)> =
            (0..n).flat_map(|l| (0..n).map(move |r| (l, r))).filter(|_| rng.random_bool(density)).collect();
        let g = BipartiteGraph::new(n, n, edges).expect("no duplicates");
        let all = enumerate_perfect_matchings(&g).expect("small graph");
        if let Some(m) = all.choose(rng) {
            let m = m.clone();
            return build(rng, Structure::PerfectMatching(g), m, false);
        }
    }
}

/// Integral maximum flow by shortest augmenting paths, scanning arcs in the
/// given order.
fn max_flow(g: &Digraph, caps: &[f64], s: usize, t: usize, order: &[usize]) -> Vec<f64> {
    let mut f = vec![0.0; g.arc_count()];
    loop {
        let mut prev: Vec<Option<(usize, bool)>> = vec![None; g.node_count()];
        let mut seen = vec![false; g.node_count()];
        seen[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for &a in order {
                let (u, v) = g.arc(a);
                if u == x && !seen[v] && f[a] < caps[a] {
                    seen[v] = true;
                    prev[v] = Some((a, true));
                    queue.push_back(v);
                }
                if v == x && !seen[u] && f[a] > 0.0 {
                    seen[u] = true;
                    prev[u] = Some((a, false));
                    queue.push_back(u);
                }
            }
        }
        if !seen[t] {
            return f;
        }
        let mut x = t;
        while x != s {
            let (a, fwd) = prev[x].expect("path back to source");
            if fwd {
                f[a] += 1.0;
                x = g.arc(a).0;
            } else {
                f[a] -= 1.0;
                x = g.arc(a).1;
            }
        }
    }
}

/// Arcs carrying a strictly partial flow form an undirected forest.
fn partial_arcs_acyclic(g: &Digraph, caps: &[f64], f: &[f64]) -> bool {
    let mut uf = UnionFind::new(g.node_count());
    (0..g.arc_count()).filter(|&a| f[a] > 0.0 && f[a] < caps[a]).all(|a| uf.union(g.arc(a).0, g.arc(a).1))
}

pub fn random_flow<R: Rng>(rng: &mut R) -> Instance {
    loop {
        let n = rng.random_range(2..=5);
        let density = rng.random_range(0.3..0.7);
        let g = random_digraph(rng, n, density);
        if g.arc_count() == 0 || g.arc_count() > 9 {
            continue;
        }
        let caps: Vec<f64> = (0..g.arc_count()).map(|_| f64::from(rng.random_range(1..=2u8))).collect();
        let mut order: Vec<usize> = (0..g.arc_count()).collect();
        order.shuffle(rng);
        let f = max_flow(&g, &caps, 0, n - 1, &order);
        if !partial_arcs_acyclic(&g, &caps, &f) {
            continue;
        }
        let net = FlowNetwork::new(g, caps, f, 0, n - 1).expect("augmenting paths give a maximum flow");
        let support = net.support();
        return build(rng, Structure::MinCostFlow(net), support, false);
    }
}

pub fn random_sp_tree<R: Rng>(rng: &mut R) -> Instance {
    loop {
        let n = rng.random_range(2..=5);
        let density = rng.random_range(0.3..0.8);
        let g = random_digraph(rng, n, density);
        let trees = enumerate_arborescences(&g, 0).expect("small graph");
        if let Some(t) = trees.choose(rng) {
            let t = t.clone();
            return build(rng, Structure::SpTree { graph: g, root: 0 }, t, true);
        }
    }
}

pub fn random_instance<R: Rng>(rng: &mut R, kind: Kind) -> Instance {
    match kind {
        Kind::Matroid => random_matroid(rng),
        Kind::MatroidIntersection => random_intersection(rng),
        Kind::Arborescence => random_arborescence(rng),
        Kind::StPath => random_st_path(rng),
        Kind::PerfectMatching => random_matching(rng, 4),
        Kind::MinCostFlow => random_flow(rng),
        Kind::SpTree => random_sp_tree(rng),
    }
}

/// Spanning-tree examples on the complete graph `K_n` whose truth is the
/// unique argmax under `theta` with score gap at least `margin` over every
/// other tree. Feature entries are uniform in `[-1, 1]`.
pub fn separable_tree_stream<R: Rng>(
    rng: &mut R,
    theta: &[f64],
    nodes: usize,
    count: usize,
    margin: f64,
) -> Vec<FeaturizedExample> {
    let edges: Vec<(usize, usize)> = (0..nodes).flat_map(|u| (u + 1..nodes).map(move |v| (u, v))).collect();
    let problem = Problem::SpanningTree { nodes, edges: edges.clone() };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let features: Vec<Vec<f64>> =
            (0..edges.len()).map(|_| (0..theta.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let w: Vec<f64> = features.iter().map(|f| f.iter().zip(theta).map(|(a, b)| a * b).sum()).collect();
        let truth = crate::learn::argmax(&problem, &w).expect("complete graphs have spanning trees");
        let Some(other) = crate::learn::best_other(&problem, &w, &truth) else { continue };
        let gap: f64 = truth.iter().map(|&e| w[e]).sum::<f64>() - other.iter().map(|&e| w[e]).sum::<f64>();
        if gap >= margin {
            out.push(FeaturizedExample::new(problem.clone(), features, truth).expect("argmax is feasible"));
        }
    }
    out
}
