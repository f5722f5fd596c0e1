//! Brute-force verification by exhaustive competitor enumeration.
//!
//! Every competitor is turned into a difference vector `diff` such that the
//! designated solution beats it by `diff · w`. Nothing here goes through the
//! exchange graph, the auxiliary graph `H` or residual cycles.

use std::collections::BTreeSet;

use crate::constraints::{ConstraintSystem, Family, Sense, VarRole};
use crate::error::{Error, Result};
use crate::graph::{membership, BipartiteGraph, Digraph};
use crate::instance::{Instance, Structure};
use crate::inverse::arborescence::{is_arborescence, st_path_reduction};
use crate::inverse::flow::FlowNetwork;
use crate::inverse::OptSense;
use crate::matroid::{enumerate_bases, enumerate_common_bases, Matroid};
use crate::qp::{self, QpProblem, QpSettings, QpSolution, Status};

pub const MAX_GROUND: usize = 12;
pub const MAX_SIDE: usize = 6;
pub const MAX_NODES: usize = 6;
pub const MAX_COMPETITORS: usize = 100_000;

/// Which competitor family to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Semantics {
    /// Feasible solutions of the original problem: bases, common bases,
    /// arborescences, simple s-t paths, perfect matchings, integral maximum
    /// flows, simple root paths.
    #[default]
    Definition,
    /// The competitor family the inverse formulation actually encodes. Differs
    /// from `Definition` only for s-t paths (arborescences of the augmented
    /// graph) and shortest-path trees (root walks of at most `n` arcs).
    Formulation,
}

/// One competitor and the margin vector against it.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Element ids of the competitor, repeated by multiplicity for flows and
    /// walks.
    pub competitor: Vec<usize>,
    /// Sparse coefficients with `margin = Σ diff_e · w_e`.
    pub diff: Vec<(usize, f64)>,
}

impl Comparison {
    pub fn margin(&self, w: &[f64]) -> f64 {
        self.diff.iter().map(|&(e, c)| c * w[e]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub ok: bool,
    pub worst_competitor: Option<Vec<usize>>,
    /// Smallest margin over all competitors, `+∞` when there are none.
    pub margin: f64,
}

fn guard(what: &str, size: usize, limit: usize) -> Result<()> {
    if size > limit {
        return Err(Error::Guard(format!("{what} {size} exceeds the oracle limit {limit}")));
    }
    Ok(())
}

fn counts(ids: &[usize], len: usize) -> Vec<f64> {
    let mut c = vec![0.0; len];
    for &e in ids {
        c[e] += 1.0;
    }
    c
}

/// `sign · (usage(designated) − usage(competitor))` as a sparse vector.
fn diff_of(designated: &[f64], competitor: &[f64], sign: f64) -> Vec<(usize, f64)> {
    designated
        .iter()
        .zip(competitor)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(e, (a, b))| (e, sign * (a - b)))
        .collect()
}

fn set_comparisons(all: Vec<Vec<usize>>, designated: &[usize], len: usize, sense: OptSense) -> Vec<Comparison> {
    let base = counts(designated, len);
    all.into_iter()
        .filter(|s| s.as_slice() != designated)
        .map(|s| {
            let diff = diff_of(&base, &counts(&s, len), sense.sign());
            Comparison { competitor: s, diff }
        })
        .collect()
}

/// All spanning out-trees rooted at `root`, as sorted arc lists.
pub fn enumerate_arborescences(g: &Digraph, root: usize) -> Result<Vec<Vec<usize>>> {
    guard("node count", g.node_count(), MAX_NODES)?;
    let n = g.node_count();
    let ins = g.in_arcs();
    let choices: Vec<Vec<usize>> =
        (0..n).filter(|&v| v != root).map(|v| ins[v].iter().copied().filter(|&a| g.arc(a).0 != v).collect()).collect();
    let product = choices.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len().max(1)));
    guard("arborescence candidate count", product.unwrap_or(usize::MAX), 10 * MAX_COMPETITORS)?;
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(choices.len());
    fn rec(
        i: usize,
        choices: &[Vec<usize>],
        pick: &mut Vec<usize>,
        g: &Digraph,
        root: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == choices.len() {
            if is_arborescence(g, root, pick) {
                let mut t = pick.clone();
                t.sort_unstable();
                out.push(t);
            }
            return;
        }
        for &a in &choices[i] {
            pick.push(a);
            rec(i + 1, choices, pick, g, root, out);
            pick.pop();
        }
    }
    rec(0, &choices, &mut pick, g, root, &mut out);
    out.sort();
    Ok(out)
}

/// All simple directed `s -> t` paths as arc sequences.
pub fn enumerate_simple_paths(g: &Digraph, s: usize, t: usize) -> Result<Vec<Vec<usize>>> {
    guard("node count", g.node_count(), MAX_NODES)?;
    let out_arcs = g.out_arcs();
    let mut out = Vec::new();
    let mut seen = vec![false; g.node_count()];
    let mut path = Vec::new();
    fn rec(
        v: usize,
        t: usize,
        g: &Digraph,
        out_arcs: &[Vec<usize>],
        seen: &mut [bool],
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if v == t {
            guard("competitor count", out.len() + 1, MAX_COMPETITORS)?;
            out.push(path.clone());
            return Ok(());
        }
        seen[v] = true;
        for &a in &out_arcs[v] {
            let h = g.arc(a).1;
            if !seen[h] {
                path.push(a);
                rec(h, t, g, out_arcs, seen, path, out)?;
                path.pop();
            }
        }
        seen[v] = false;
        Ok(())
    }
    if s != t {
        rec(s, t, g, &out_arcs, &mut seen, &mut path, &mut out)?;
    }
    Ok(out)
}

/// All walks from `root` with between 1 and `max_len` arcs, grouped by their
/// end node, as arc sequences.
pub fn enumerate_walks(g: &Digraph, root: usize, max_len: usize) -> Result<Vec<(usize, Vec<usize>)>> {
    guard("node count", g.node_count(), MAX_NODES)?;
    let out_arcs = g.out_arcs();
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(root, Vec::new())];
    while let Some((v, walk)) = stack.pop() {
        if !walk.is_empty() {
            guard("walk count", out.len() + 1, 10 * MAX_COMPETITORS)?;
            out.push((v, walk.clone()));
        }
        if walk.len() < max_len {
            for &a in out_arcs[v].iter().rev() {
                let mut next = walk.clone();
                next.push(a);
                stack.push((g.arc(a).1, next));
            }
        }
    }
    Ok(out)
}

/// All perfect matchings as sorted edge lists.
pub fn enumerate_perfect_matchings(g: &BipartiteGraph) -> Result<Vec<Vec<usize>>> {
    guard("left side", g.left_count(), MAX_SIDE)?;
    guard("right side", g.right_count(), MAX_SIDE)?;
    if g.left_count() != g.right_count() {
        return Ok(Vec::new());
    }
    let inc = g.left_incidence();
    let mut out = Vec::new();
    let mut used = vec![false; g.right_count()];
    let mut pick = Vec::new();
    fn rec(
        x: usize,
        g: &BipartiteGraph,
        inc: &[Vec<usize>],
        used: &mut [bool],
        pick: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if x == inc.len() {
            let mut m = pick.clone();
            m.sort_unstable();
            out.push(m);
            return;
        }
        for &e in &inc[x] {
            let r = g.edge(e).1;
            if !used[r] {
                used[r] = true;
                pick.push(e);
                rec(x + 1, g, inc, used, pick, out);
                pick.pop();
                used[r] = false;
            }
        }
    }
    rec(0, g, &inc, &mut used, &mut pick, &mut out);
    out.sort();
    Ok(out)
}

/// Alternating cycles of `matching`, found as the perfect matchings whose
/// symmetric difference with it is connected. Each cycle is a sorted edge list.
pub fn alternating_cycles(g: &BipartiteGraph, matching: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut sorted = matching.to_vec();
    sorted.sort_unstable();
    let in_m = membership(&sorted, g.edge_count());
    let mut out = Vec::new();
    for other in enumerate_perfect_matchings(g)? {
        let in_o = membership(&other, g.edge_count());
        let sym: Vec<usize> = (0..g.edge_count()).filter(|&e| in_m[e] != in_o[e]).collect();
        if sym.is_empty() {
            continue;
        }
        let n = g.left_count() + g.right_count();
        let mut uf = crate::graph::UnionFind::new(n);
        for &e in &sym {
            let (l, r) = g.edge(e);
            uf.union(l, g.left_count() + r);
        }
        let touched: BTreeSet<usize> = sym
            .iter()
            .flat_map(|&e| {
                let (l, r) = g.edge(e);
                [l, g.left_count() + r]
            })
            .collect();
        let roots: BTreeSet<usize> = touched.iter().map(|&v| uf.find(v)).collect();
        if roots.len() == 1 {
            out.push(sym);
        }
    }
    Ok(out)
}

fn integral(values: &[f64], what: &str) -> Result<Vec<i64>> {
    values
        .iter()
        .map(|&x| {
            let r = x.round();
            if (x - r).abs() > 1e-9 {
                Err(Error::Precondition(format!("{what} must be integral for flow enumeration, found {x}")))
            } else {
                Ok(r as i64)
            }
        })
        .collect()
}

/// All integral flows of maximum value, as per-arc amounts.
pub fn enumerate_integral_max_flows(net: &FlowNetwork) -> Result<Vec<Vec<i64>>> {
    let g = net.graph();
    guard("node count", g.node_count(), MAX_NODES)?;
    let caps = integral(net.capacities(), "capacities")?;
    let value = net.value().round() as i64;
    let (s, t, n, m) = (net.source(), net.sink(), g.node_count(), g.arc_count());
    let mut last = vec![None; n];
    for (a, &(u, v)) in g.arcs().iter().enumerate() {
        last[u] = Some(a);
        last[v] = Some(a);
    }
    let closes: Vec<Vec<usize>> = (0..m).map(|a| (0..n).filter(|&v| last[v] == Some(a)).collect()).collect();
    let mut out = Vec::new();
    let mut excess = vec![0i64; n];
    let mut f = vec![0i64; m];
    struct Ctx<'a> {
        g: &'a Digraph,
        caps: &'a [i64],
        closes: &'a [Vec<usize>],
        s: usize,
        t: usize,
        value: i64,
    }
    fn rec(a: usize, cx: &Ctx<'_>, f: &mut [i64], excess: &mut [i64], out: &mut Vec<Vec<i64>>) -> Result<()> {
        if a == f.len() {
            if excess.iter().enumerate().all(|(v, &e)| v == cx.s || v == cx.t || e == 0) && -excess[cx.s] == cx.value {
                guard("competitor count", out.len() + 1, MAX_COMPETITORS)?;
                out.push(f.to_vec());
            }
            return Ok(());
        }
        let (u, v) = cx.g.arc(a);
        for x in 0..=cx.caps[a] {
            f[a] = x;
            excess[u] -= x;
            excess[v] += x;
            let balanced = cx.closes[a].iter().all(|&w| w == cx.s || w == cx.t || excess[w] == 0);
            if balanced {
                rec(a + 1, cx, f, excess, out)?;
            }
            excess[u] += x;
            excess[v] -= x;
        }
        f[a] = 0;
        Ok(())
    }
    let cx = Ctx { g, caps: &caps, closes: &closes, s, t, value };
    rec(0, &cx, &mut f, &mut excess, &mut out)?;
    Ok(out)
}

fn tree_path_counts(g: &Digraph, root: usize, tree: &[usize], v: usize) -> Vec<f64> {
    let mut parent = vec![None; g.node_count()];
    for &a in tree {
        parent[g.arc(a).1] = Some(a);
    }
    let mut c = vec![0.0; g.arc_count()];
    let mut cur = v;
    while cur != root {
        let a = parent[cur].expect("tree spans every node");
        c[a] += 1.0;
        cur = g.arc(a).0;
    }
    c
}

/// Every competitor of the designated solution under `semantics`.
pub fn comparisons(inst: &Instance, semantics: Semantics) -> Result<Vec<Comparison>> {
    let d = &inst.designated;
    let len = inst.element_count();
    let out = match &inst.structure {
        Structure::Matroid(m) => {
            guard("ground set", m.ground_size(), MAX_GROUND)?;
            set_comparisons(enumerate_bases(m)?, d, len, OptSense::Max)
        }
        Structure::Intersection(m1, m2) => {
            guard("ground set", m1.ground_size(), MAX_GROUND)?;
            set_comparisons(enumerate_common_bases(m1, m2)?, d, len, OptSense::Max)
        }
        Structure::Arborescence { graph, root, sense } => {
            set_comparisons(enumerate_arborescences(graph, *root)?, d, len, *sense)
        }
        Structure::StPath { graph, source, sink } => match semantics {
            Semantics::Definition => {
                let paths = enumerate_simple_paths(graph, *source, *sink)?
                    .into_iter()
                    .map(|mut p| {
                        p.sort_unstable();
                        p
                    })
                    .collect();
                set_comparisons(paths, d, len, OptSense::Min)
            }
            Semantics::Formulation => {
                let red = st_path_reduction(graph, *source, *sink, d)?;
                let base = counts(&red.tree, red.graph.arc_count());
                enumerate_arborescences(&red.graph, *source)?
                    .into_iter()
                    .filter(|t| *t != red.tree)
                    .map(|t| {
                        let diff = diff_of(&base, &counts(&t, red.graph.arc_count()), -1.0)
                            .into_iter()
                            .filter(|&(e, _)| e < len)
                            .collect();
                        Comparison { competitor: t, diff }
                    })
                    .collect()
            }
        },
        Structure::PerfectMatching(g) => set_comparisons(enumerate_perfect_matchings(g)?, d, len, OptSense::Max),
        Structure::MinCostFlow(net) => {
            let base = integral(net.flow(), "flow")?;
            let basef: Vec<f64> = base.iter().map(|&x| x as f64).collect();
            enumerate_integral_max_flows(net)?
                .into_iter()
                .filter(|f| *f != base)
                .map(|f| {
                    let ff: Vec<f64> = f.iter().map(|&x| x as f64).collect();
                    let competitor =
                        f.iter().enumerate().flat_map(|(a, &x)| std::iter::repeat_n(a, x as usize)).collect();
                    Comparison { competitor, diff: diff_of(&basef, &ff, -1.0) }
                })
                .collect()
        }
        Structure::SpTree { graph, root } => {
            let n = graph.node_count();
            let tree_counts: Vec<Vec<f64>> = (0..n).map(|v| tree_path_counts(graph, *root, d, v)).collect();
            let candidates: Vec<(usize, Vec<usize>)> = match semantics {
                Semantics::Definition => {
                    let mut all = Vec::new();
                    for v in (0..n).filter(|&v| v != *root) {
                        all.extend(enumerate_simple_paths(graph, *root, v)?.into_iter().map(|p| (v, p)));
                    }
                    all
                }
                Semantics::Formulation => enumerate_walks(graph, *root, n)?,
            };
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for (v, walk) in candidates {
                let c = counts(&walk, graph.arc_count());
                if c == tree_counts[v] {
                    continue;
                }
                let diff = diff_of(&tree_counts[v], &c, -1.0);
                let key: Vec<(usize, u64)> = diff.iter().map(|&(e, x)| (e, x.to_bits())).collect();
                if seen.insert(key) {
                    out.push(Comparison { competitor: walk, diff });
                }
            }
            out
        }
    };
    guard("competitor count", out.len(), MAX_COMPETITORS)?;
    Ok(out)
}

/// Checks the margin of the designated solution under `w_prime` against every
/// feasible competitor.
pub fn verify_delta_optimal(inst: &Instance, w_prime: &[f64], tol: f64) -> Result<Verdict> {
    verify_with(inst, w_prime, tol, Semantics::Definition)
}

pub fn verify_with(inst: &Instance, w_prime: &[f64], tol: f64, semantics: Semantics) -> Result<Verdict> {
    if w_prime.len() != inst.element_count() {
        return Err(Error::Dimension { expected: inst.element_count(), got: w_prime.len() });
    }
    let mut worst: Option<(f64, Vec<usize>)> = None;
    for c in comparisons(inst, semantics)? {
        let margin = c.margin(w_prime);
        if worst.as_ref().is_none_or(|(m, _)| margin < *m) {
            worst = Some((margin, c.competitor));
        }
    }
    Ok(match worst {
        None => Verdict { ok: true, worst_competitor: None, margin: f64::INFINITY },
        Some((margin, comp)) => Verdict { ok: margin >= inst.delta - tol, worst_competitor: Some(comp), margin },
    })
}

/// The least-distance program with one row per competitor.
pub fn oracle_problem(inst: &Instance, semantics: Semantics) -> Result<QpProblem> {
    let mut sys = ConstraintSystem::new();
    let vars: Vec<usize> = (0..inst.element_count()).map(|e| sys.add_var(VarRole::Weight(e))).collect();
    for c in comparisons(inst, semantics)? {
        sys.push(c.diff.iter().map(|&(e, x)| (vars[e], x)), Sense::Ge, inst.delta, Family::Competitor)?;
    }
    QpProblem::new(sys, vars.iter().zip(inst.weights.iter()).map(|(&v, &w)| (v, w)).collect())
}

pub fn oracle_solve(inst: &Instance, semantics: Semantics, settings: &QpSettings) -> Result<QpSolution> {
    let sol = qp::solve_with(&oracle_problem(inst, semantics)?, settings);
    if sol.status != Status::Optimal {
        return Err(Error::Solver(format!("oracle program ended with status {}", sol.status.as_str())));
    }
    Ok(sol)
}

/// Optimal objective of the enumerated-competitor program.
pub fn oracle_objective(inst: &Instance, settings: &QpSettings) -> Result<f64> {
    Ok(oracle_solve(inst, Semantics::Definition, settings)?.objective)
}
