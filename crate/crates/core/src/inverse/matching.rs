//! Inverse maximum-weight perfect matching through the contracted graph `H`
//! on the left vertices.

use super::{check_delta, weight_exprs, Completion, Formulation, InverseSolution};
use crate::constraints::{ConstraintSystem, LinExpr, VarRole};
use crate::cyclebound::{r2_constraints, SymbolicDigraph};
use crate::error::{Error, Result};
use crate::graph::{membership, normalize_set, BipartiteGraph, Digraph};
use crate::qp::QpSettings;

/// Arc `x -> z` of `H`, witnessed by the matched edge `(x, M(x))` and the
/// unmatched edge `(z, M(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxArc {
    pub tail: usize,
    pub head: usize,
    pub matched_edge: usize,
    pub other_edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxGraphH {
    pub left_count: usize,
    pub arcs: Vec<AuxArc>,
    /// Matched edge id of each left vertex.
    pub mate_edge: Vec<usize>,
}

impl AuxGraphH {
    pub fn digraph(&self) -> Digraph {
        Digraph::new(self.left_count, self.arcs.iter().map(|a| (a.tail, a.head)).collect())
            .expect("aux arcs join left vertices")
    }

    pub fn symbolic(&self, weights: &[LinExpr]) -> SymbolicDigraph {
        let lengths = self
            .arcs
            .iter()
            .map(|a| {
                let mut l = weights[a.matched_edge].clone();
                l.add(&weights[a.other_edge].scaled(-1.0));
                l
            })
            .collect();
        SymbolicDigraph::new(self.digraph(), lengths).expect("one length per arc")
    }

    pub fn numeric_lengths(&self, w: &[f64]) -> Vec<f64> {
        self.arcs.iter().map(|a| w[a.matched_edge] - w[a.other_edge]).collect()
    }
}

/// Matched edge per left vertex, or an error if `matching` is not perfect.
pub fn mate_edges(g: &BipartiteGraph, matching: &[usize]) -> Result<Vec<usize>> {
    let not_perfect = |why: String| Error::Precondition(format!("designated edges are not a perfect matching: {why}"));
    if g.left_count() != g.right_count() {
        return Err(not_perfect(format!("sides have {} and {} vertices", g.left_count(), g.right_count())));
    }
    let sorted = normalize_set(matching).ok_or_else(|| not_perfect("repeated edge".into()))?;
    let mut mate = vec![None; g.left_count()];
    let mut right_used = vec![false; g.right_count()];
    for &e in &sorted {
        if e >= g.edge_count() {
            return Err(not_perfect(format!("unknown edge {e}")));
        }
        let (l, r) = g.edge(e);
        if mate[l].replace(e).is_some() || std::mem::replace(&mut right_used[r], true) {
            return Err(not_perfect(format!("vertex of edge {e} matched twice")));
        }
    }
    mate.into_iter()
        .enumerate()
        .map(|(x, e)| e.ok_or_else(|| not_perfect(format!("left vertex {x} is unmatched"))))
        .collect()
}

pub fn build_aux_graph(g: &BipartiteGraph, matching: &[usize]) -> Result<AuxGraphH> {
    let mate_edge = mate_edges(g, matching)?;
    let in_m = membership(&mate_edge, g.edge_count());
    let mut arcs = Vec::new();
    for x in 0..g.left_count() {
        let y = g.edge(mate_edge[x]).1;
        for (e, &(z, r)) in g.edges().iter().enumerate() {
            if r == y && !in_m[e] && z != x {
                arcs.push(AuxArc { tail: x, head: z, matched_edge: mate_edge[x], other_edge: e });
            }
        }
    }
    Ok(AuxGraphH { left_count: g.left_count(), arcs, mate_edge })
}

pub fn formulate_matching(g: &BipartiteGraph, matching: &[usize], delta: f64) -> Result<Formulation> {
    check_delta(delta)?;
    let h = build_aux_graph(g, matching)?;
    let mut system = ConstraintSystem::new();
    let weight_vars: Vec<usize> = (0..g.edge_count()).map(|e| system.add_var(VarRole::Weight(e))).collect();
    let graph = h.symbolic(&weight_exprs(&weight_vars));
    let layout = r2_constraints(&mut system, &graph, delta)?;
    Ok(Formulation { system, weight_vars, negated: false, completion: Completion::Cycles { graph, layout, delta } })
}

pub fn inverse_perfect_matching(
    g: &BipartiteGraph,
    w: &[f64],
    matching: &[usize],
    delta: f64,
    settings: &QpSettings,
) -> Result<InverseSolution> {
    if w.len() != g.edge_count() {
        return Err(Error::Dimension { expected: g.edge_count(), got: w.len() });
    }
    formulate_matching(g, matching, delta)?.solve(w, settings)
}
