//! Inverse min-cost maximum flow through residual-graph cycles.
//!
//! An arc with `0 < f < c` has both residual directions, which form a 2-cycle
//! of length zero that corresponds to no other flow. When such pairs exist the
//! cycle rows are written over the non-backtracking line graph of the
//! residual graph, whose cycles never turn around on the same arc.

use log::warn;

use super::{check_delta, weight_exprs, Completion, Formulation, InverseSolution};
use crate::constraints::{ConstraintSystem, LinExpr, VarRole};
use crate::cyclebound::{r2_constraints, SymbolicDigraph};
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::qp::QpSettings;

const FLOW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    graph: Digraph,
    capacities: Vec<f64>,
    flow: Vec<f64>,
    source: usize,
    sink: usize,
}

impl FlowNetwork {
    /// Checks bounds, conservation and maximality.
    pub fn new(graph: Digraph, capacities: Vec<f64>, flow: Vec<f64>, source: usize, sink: usize) -> Result<Self> {
        let m = graph.arc_count();
        let n = graph.node_count();
        if capacities.len() != m {
            return Err(Error::Validation(format!("expected {m} capacities, got {}", capacities.len())));
        }
        if flow.len() != m {
            return Err(Error::Validation(format!("expected {m} flow values, got {}", flow.len())));
        }
        if source >= n || sink >= n || source == sink {
            return Err(Error::Validation(format!("invalid terminals source={source} sink={sink}")));
        }
        for a in 0..m {
            let (c, f) = (capacities[a], flow[a]);
            if !c.is_finite() || c < 0.0 {
                return Err(Error::Validation(format!("arc {a} has invalid capacity {c}")));
            }
            if !f.is_finite() || f < -FLOW_TOL || f > c + FLOW_TOL {
                return Err(Error::Validation(format!("arc {a} carries {f} outside [0, {c}]")));
            }
            if c == 0.0 {
                warn!("arc {a} has zero capacity and no residual arcs");
            }
        }
        let mut excess = vec![0.0; n];
        for (a, &(u, v)) in graph.arcs().iter().enumerate() {
            excess[u] -= flow[a];
            excess[v] += flow[a];
        }
        for (v, &e) in excess.iter().enumerate() {
            if v != source && v != sink && e.abs() > FLOW_TOL {
                return Err(Error::Validation(format!("flow is not conserved at node {v} (excess {e})")));
            }
        }
        let net = FlowNetwork { graph, capacities, flow, source, sink };
        let residual = net.residual();
        if residual.reaches(source, sink) {
            return Err(Error::Validation("flow is not maximum: the residual graph has a source-sink path".into()));
        }
        Ok(net)
    }

    pub fn graph(&self) -> &Digraph {
        &self.graph
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn flow(&self) -> &[f64] {
        &self.flow
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn value(&self) -> f64 {
        self.graph
            .arcs()
            .iter()
            .zip(&self.flow)
            .map(|(&(u, v), &f)| (if u == self.source { f } else { 0.0 }) - (if v == self.source { f } else { 0.0 }))
            .sum()
    }

    /// Arcs carrying positive flow.
    pub fn support(&self) -> Vec<usize> {
        (0..self.flow.len()).filter(|&a| self.flow[a] > FLOW_TOL).collect()
    }

    pub fn residual(&self) -> ResidualGraph {
        let mut arcs = Vec::new();
        for (a, &(u, v)) in self.graph.arcs().iter().enumerate() {
            if self.flow[a] < self.capacities[a] - FLOW_TOL {
                arcs.push(ResidualArc { tail: u, head: v, arc: a, forward: true });
            }
            if self.flow[a] > FLOW_TOL {
                arcs.push(ResidualArc { tail: v, head: u, arc: a, forward: false });
            }
        }
        ResidualGraph { node_count: self.graph.node_count(), arcs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualArc {
    pub tail: usize,
    pub head: usize,
    /// Original arc.
    pub arc: usize,
    pub forward: bool,
}

/// Forward arcs where `f < c` (length `+w`), backward arcs where `f > 0`
/// (length `−w`), in original arc order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGraph {
    pub node_count: usize,
    pub arcs: Vec<ResidualArc>,
}

impl ResidualGraph {
    pub fn digraph(&self) -> Digraph {
        Digraph::new(self.node_count, self.arcs.iter().map(|a| (a.tail, a.head)).collect())
            .expect("residual arcs join network nodes")
    }

    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.digraph().reachable_from(from, |_| true)[to]
    }

    /// Index of the opposite residual arc of the same original arc.
    pub fn twins(&self) -> Vec<Option<usize>> {
        let mut by_arc: Vec<Vec<usize>> = Vec::new();
        for (i, a) in self.arcs.iter().enumerate() {
            if by_arc.len() <= a.arc {
                by_arc.resize(a.arc + 1, Vec::new());
            }
            by_arc[a.arc].push(i);
        }
        let mut twin = vec![None; self.arcs.len()];
        for pair in by_arc.iter().filter(|p| p.len() == 2) {
            twin[pair[0]] = Some(pair[1]);
            twin[pair[1]] = Some(pair[0]);
        }
        twin
    }

    pub fn has_twins(&self) -> bool {
        self.twins().iter().any(Option::is_some)
    }

    fn length_expr(&self, i: usize, weights: &[LinExpr]) -> LinExpr {
        let a = self.arcs[i];
        if a.forward {
            weights[a.arc].clone()
        } else {
            weights[a.arc].scaled(-1.0)
        }
    }

    pub fn numeric_lengths(&self, w: &[f64]) -> Vec<f64> {
        self.arcs.iter().map(|a| if a.forward { w[a.arc] } else { -w[a.arc] }).collect()
    }

    pub fn symbolic(&self, weights: &[LinExpr]) -> SymbolicDigraph {
        let lengths = (0..self.arcs.len()).map(|i| self.length_expr(i, weights)).collect();
        SymbolicDigraph::new(self.digraph(), lengths).expect("one length per arc")
    }

    /// Nodes are residual arcs; `a -> b` when `b` leaves the head of `a` and is
    /// not the reverse of `a`. Each line arc carries the length of its tail.
    pub fn line_graph(&self) -> Digraph {
        let twins = self.twins();
        let mut arcs = Vec::new();
        for (i, a) in self.arcs.iter().enumerate() {
            for (j, b) in self.arcs.iter().enumerate() {
                if a.head == b.tail && twins[i] != Some(j) {
                    arcs.push((i, j));
                }
            }
        }
        Digraph::new(self.arcs.len(), arcs).expect("line arcs join residual arcs")
    }

    pub fn line_symbolic(&self, weights: &[LinExpr]) -> SymbolicDigraph {
        let g = self.line_graph();
        let lengths = g.arcs().iter().map(|&(i, _)| self.length_expr(i, weights)).collect();
        SymbolicDigraph::new(g, lengths).expect("one length per arc")
    }
}

pub fn build_residual(net: &FlowNetwork) -> ResidualGraph {
    net.residual()
}

pub fn formulate_flow(net: &FlowNetwork, delta: f64) -> Result<Formulation> {
    check_delta(delta)?;
    let residual = net.residual();
    let mut system = ConstraintSystem::new();
    let weight_vars: Vec<usize> = (0..net.graph.arc_count()).map(|a| system.add_var(VarRole::Weight(a))).collect();
    let exprs = weight_exprs(&weight_vars);
    let graph = if residual.has_twins() { residual.line_symbolic(&exprs) } else { residual.symbolic(&exprs) };
    let layout = r2_constraints(&mut system, &graph, delta)?;
    Ok(Formulation { system, weight_vars, negated: false, completion: Completion::Cycles { graph, layout, delta } })
}

pub fn inverse_min_cost_flow(
    net: &FlowNetwork,
    w: &[f64],
    delta: f64,
    settings: &QpSettings,
) -> Result<InverseSolution> {
    if w.len() != net.graph.arc_count() {
        return Err(Error::Dimension { expected: net.graph.arc_count(), got: w.len() });
    }
    formulate_flow(net, delta)?.solve(w, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// s=0, a=1, t=2: three unit arcs s->a with costs (1,3,2), bottleneck a->t of capacity 2.
    fn bottleneck() -> FlowNetwork {
        let g = Digraph::new(3, vec![(0, 1), (0, 1), (0, 1), (1, 2)]).unwrap();
        FlowNetwork::new(g, vec![1.0, 1.0, 1.0, 2.0], vec![1.0, 1.0, 0.0, 2.0], 0, 2).unwrap()
    }

    #[test]
    fn parallel_arcs_not_maximum() {
        let g = Digraph::new(2, vec![(0, 1), (0, 1), (0, 1)]).unwrap();
        let err = FlowNetwork::new(g, vec![1.0; 3], vec![1.0, 1.0, 0.0], 0, 1).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("not maximum")));
    }

    #[test]
    fn residual_arc_rule() {
        let r = bottleneck().residual();
        let got: Vec<(usize, bool)> = r.arcs.iter().map(|a| (a.arc, a.forward)).collect();
        assert_eq!(got, vec![(0, false), (1, false), (2, true), (3, false)]);
        assert!(!r.has_twins());
    }

    #[test]
    fn saturated_arcs_only_backward() {
        let g = Digraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let net = FlowNetwork::new(g, vec![1.0, 1.0], vec![1.0, 1.0], 0, 2).unwrap();
        assert!(net.residual().arcs.iter().all(|a| !a.forward));
    }

    #[test]
    fn conservation_violation() {
        let g = Digraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        assert!(FlowNetwork::new(g, vec![1.0, 1.0], vec![1.0, 0.0], 0, 2).is_err());
    }

    #[test]
    fn bottleneck_golden() {
        let s = inverse_min_cost_flow(&bottleneck(), &[1.0, 3.0, 2.0, 1.0], 0.0, &QpSettings::default()).unwrap();
        let want = [1.0, 2.5, 2.5, 1.0];
        for (a, b) in s.weights.iter().zip(&want) {
            assert!((a - b).abs() < 1e-7, "{:?}", s.weights);
        }
        assert!((s.objective - 0.5).abs() < 1e-7);
    }

    #[test]
    fn twin_arcs_use_line_graph() {
        // s -> a (cap 2, flow 1), a -> t (cap 1, flow 1).
        let g = Digraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let net = FlowNetwork::new(g, vec![2.0, 1.0], vec![1.0, 1.0], 0, 2).unwrap();
        let r = net.residual();
        assert!(r.has_twins());
        assert_eq!(r.line_graph().arcs(), &[(2, 1)]);
        let s = inverse_min_cost_flow(&net, &[1.0, 1.0], 1.0, &QpSettings::default()).unwrap();
        assert!(s.is_optimal());
        assert!(s.objective < 1e-12);
    }
}
