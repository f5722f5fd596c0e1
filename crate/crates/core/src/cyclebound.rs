//! Constraints forcing every directed cycle of a graph with symbolic arc
//! lengths to have length at least `delta`.
//!
//! [`r2_constraints`] is the compact distance-variable formulation;
//! [`r1_constraints_enumerated`] writes one row per simple cycle and serves
//! as the reference in tests.

use crate::constraints::{ConstraintSystem, Family, LinExpr, Sense, VarRole};
use crate::error::{Error, Result};
use crate::graph::Digraph;

pub const CYCLE_LIMIT: usize = 100_000;

/// Digraph whose arc lengths are affine expressions over system variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicDigraph {
    pub graph: Digraph,
    pub lengths: Vec<LinExpr>,
}

impl SymbolicDigraph {
    pub fn new(graph: Digraph, lengths: Vec<LinExpr>) -> Result<Self> {
        if lengths.len() != graph.arc_count() {
            return Err(Error::Dimension { expected: graph.arc_count(), got: lengths.len() });
        }
        Ok(SymbolicDigraph { graph, lengths })
    }

    pub fn numeric_lengths(&self, values: &[f64]) -> Vec<f64> {
        self.lengths.iter().map(|l| l.eval(values)).collect()
    }
}

/// Variable ids created by [`r2_constraints`].
#[derive(Debug, Clone, PartialEq)]
pub struct R2Layout {
    pub node_count: usize,
    /// One per arc.
    pub length_vars: Vec<usize>,
    /// Row-major `d[x * n + z]`.
    pub distance_vars: Vec<usize>,
}

impl R2Layout {
    pub fn distance(&self, x: usize, z: usize) -> usize {
        self.distance_vars[x * self.node_count + z]
    }

    /// Writes arc lengths and a feasible distance completion into `values`.
    /// Returns false if some cycle is shorter than `delta`.
    pub fn complete(&self, g: &SymbolicDigraph, delta: f64, values: &mut [f64]) -> bool {
        let lengths = g.numeric_lengths(values);
        for (&v, &l) in self.length_vars.iter().zip(&lengths) {
            values[v] = l;
        }
        match r2_completion(&g.graph, &lengths, delta) {
            Some(d) => {
                for (&v, &x) in self.distance_vars.iter().zip(&d) {
                    values[v] = x;
                }
                true
            }
            None => false,
        }
    }
}

fn binding_vars(sys: &mut ConstraintSystem, g: &SymbolicDigraph) -> Result<Vec<usize>> {
    let mut vars = Vec::with_capacity(g.lengths.len());
    for (a, expr) in g.lengths.iter().enumerate() {
        let l = sys.add_var(VarRole::ArcLength(a));
        let mut terms = vec![(l, 1.0)];
        terms.extend(expr.terms.iter().map(|&(v, c)| (v, -c)));
        sys.push(terms, Sense::Eq, expr.constant, Family::Binding)?;
        vars.push(l);
    }
    Ok(vars)
}

/// Appends the compact region to `sys`:
/// bindings `l_a = length(a)`, `d_xy <= l_a` per arc `a = (x,y)`,
/// `d_xz <= d_xy + l_a` per node `x` and arc `a = (y,z)`, and `d_xx >= delta`.
pub fn r2_constraints(sys: &mut ConstraintSystem, g: &SymbolicDigraph, delta: f64) -> Result<R2Layout> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::Precondition(format!("delta must be non-negative, got {delta}")));
    }
    let n = g.graph.node_count();
    let length_vars = binding_vars(sys, g)?;
    let mut distance_vars = Vec::with_capacity(n * n);
    for x in 0..n {
        for z in 0..n {
            distance_vars.push(sys.add_var(VarRole::Distance(x, z)));
        }
    }
    let layout = R2Layout { node_count: n, length_vars, distance_vars };
    for (a, &(x, y)) in g.graph.arcs().iter().enumerate() {
        sys.push([(layout.distance(x, y), 1.0), (layout.length_vars[a], -1.0)], Sense::Le, 0.0, Family::ArcBound)?;
    }
    for x in 0..n {
        for (a, &(y, z)) in g.graph.arcs().iter().enumerate() {
            sys.push(
                [(layout.distance(x, z), 1.0), (layout.distance(x, y), -1.0), (layout.length_vars[a], -1.0)],
                Sense::Le,
                0.0,
                Family::Triangle,
            )?;
        }
    }
    for x in 0..n {
        sys.push([(layout.distance(x, x), 1.0)], Sense::Ge, delta, Family::CycleMargin)?;
    }
    Ok(layout)
}

/// Appends bindings and one row `Σ_{a∈C} l_a >= delta` per simple cycle `C`.
pub fn r1_constraints_enumerated(sys: &mut ConstraintSystem, g: &SymbolicDigraph, delta: f64) -> Result<Vec<usize>> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::Precondition(format!("delta must be non-negative, got {delta}")));
    }
    let cycles = simple_cycles(&g.graph, CYCLE_LIMIT)?;
    let length_vars = binding_vars(sys, g)?;
    for cycle in cycles {
        sys.push(cycle.iter().map(|&a| (length_vars[a], 1.0)), Sense::Ge, delta, Family::Cycle)?;
    }
    Ok(length_vars)
}

/// All simple directed cycles as arc-id sequences. Each cycle starts at its
/// least node; parallel arcs yield distinct cycles.
pub fn simple_cycles(g: &Digraph, limit: usize) -> Result<Vec<Vec<usize>>> {
    let out = g.out_arcs();
    let n = g.node_count();
    let mut cycles = Vec::new();
    let mut on_path = vec![false; n];
    let mut path = Vec::new();

    struct Search<'a> {
        g: &'a Digraph,
        out: &'a [Vec<usize>],
        start: usize,
        limit: usize,
    }

    fn dfs(
        s: &Search<'_>,
        u: usize,
        on_path: &mut [bool],
        path: &mut Vec<usize>,
        cycles: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        for &a in &s.out[u] {
            let v = s.g.arc(a).1;
            if v == s.start {
                if cycles.len() >= s.limit {
                    return Err(Error::Guard(format!("more than {} simple cycles", s.limit)));
                }
                path.push(a);
                cycles.push(path.clone());
                path.pop();
            } else if v > s.start && !on_path[v] {
                on_path[v] = true;
                path.push(a);
                dfs(s, v, on_path, path, cycles)?;
                path.pop();
                on_path[v] = false;
            }
        }
        Ok(())
    }

    for start in 0..n {
        let search = Search { g, out: &out, start, limit };
        on_path[start] = true;
        dfs(&search, start, &mut on_path, &mut path, &mut cycles)?;
        on_path[start] = false;
    }
    Ok(cycles)
}

/// Distances completing `lengths` to a point of the compact region, or `None`
/// when some cycle is shorter than `delta`.
///
/// `d_xz` is the shortest walk of at least one arc from `x` to `z`. Pairs with
/// no such walk get a large value offset by a feasible potential so that the
/// upper-bound rows still hold.
pub fn r2_completion(g: &Digraph, lengths: &[f64], delta: f64) -> Option<Vec<f64>> {
    let n = g.node_count();
    let inf = f64::INFINITY;
    let mut d = vec![inf; n * n];
    for (a, &(x, y)) in g.arcs().iter().enumerate() {
        d[x * n + y] = d[x * n + y].min(lengths[a]);
    }
    // Floyd-Warshall over walks with at least one arc.
    for k in 0..n {
        for x in 0..n {
            let dxk = d[x * n + k];
            if dxk == inf {
                continue;
            }
            for z in 0..n {
                let cand = dxk + d[k * n + z];
                if cand < d[x * n + z] {
                    d[x * n + z] = cand;
                }
            }
        }
    }
    let tol = 1e-9 * (1.0 + lengths.iter().fold(0.0f64, |m, l| m.max(l.abs())));
    if (0..n).any(|x| d[x * n + x] < delta - tol) {
        return None;
    }
    // Potentials from a virtual source (Bellman-Ford); no negative cycles here.
    let mut pot = vec![0.0; n];
    for _ in 0..n {
        let mut changed = false;
        for (a, &(x, y)) in g.arcs().iter().enumerate() {
            if pot[x] + lengths[a] < pot[y] {
                pot[y] = pot[x] + lengths[a];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let span: f64 = lengths.iter().map(|l| l.abs()).sum::<f64>() + delta.abs() + 1.0;
    let big = 4.0 * span;
    for x in 0..n {
        for z in 0..n {
            if d[x * n + z] == inf {
                d[x * n + z] = big + pot[z];
            }
        }
    }
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weighted(n: usize, arcs: Vec<(usize, usize)>) -> (ConstraintSystem, SymbolicDigraph) {
        let mut sys = ConstraintSystem::new();
        let lengths = (0..arcs.len()).map(|e| LinExpr::var(sys.add_var(VarRole::Weight(e)))).collect();
        let g = SymbolicDigraph::new(Digraph::new(n, arcs).unwrap(), lengths).unwrap();
        (sys, g)
    }

    #[test]
    fn two_cycle_counts() {
        let (mut sys, g) = weighted(2, vec![(0, 1), (1, 0)]);
        r2_constraints(&mut sys, &g, 1.0).unwrap();
        let non_binding = sys.row_count() - sys.count_family(Family::Binding);
        assert_eq!(non_binding, 2 + 4 + 2);
        let distances = sys.roles().iter().filter(|r| matches!(r, VarRole::Distance(..))).count();
        assert_eq!(distances, 4);
    }

    #[test]
    fn arcless_graph_has_only_margin_rows() {
        let (mut sys, g) = weighted(3, vec![]);
        r2_constraints(&mut sys, &g, 1.0).unwrap();
        assert_eq!(sys.row_count(), 3);
        assert_eq!(sys.count_family(Family::CycleMargin), 3);
    }

    #[test]
    fn fixed_self_loop_is_feasible() {
        let mut sys = ConstraintSystem::new();
        let g = SymbolicDigraph::new(Digraph::new(1, vec![(0, 0)]).unwrap(), vec![LinExpr::constant(5.0)]).unwrap();
        let layout = r2_constraints(&mut sys, &g, 3.0).unwrap();
        let mut values = vec![0.0; sys.var_count()];
        assert!(layout.complete(&g, 3.0, &mut values));
        assert_eq!(values[layout.distance(0, 0)], 5.0);
        assert_eq!(sys.max_violation(&values), 0.0);
    }

    #[test]
    fn r1_two_cycle() {
        let (mut sys, g) = weighted(2, vec![(0, 1), (1, 0)]);
        r1_constraints_enumerated(&mut sys, &g, 1.0).unwrap();
        assert_eq!(sys.count_family(Family::Cycle), 1);
        assert_eq!(sys.count_family(Family::Binding), 2);
    }

    #[test]
    fn complete_digraph_on_three_nodes_has_five_cycles() {
        let mut arcs = Vec::new();
        for u in 0..3 {
            for v in 0..3 {
                if u != v {
                    arcs.push((u, v));
                }
            }
        }
        let g = Digraph::new(3, arcs).unwrap();
        assert_eq!(simple_cycles(&g, CYCLE_LIMIT).unwrap().len(), 5);
    }

    #[test]
    fn dag_has_no_cycles() {
        let g = Digraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(simple_cycles(&g, CYCLE_LIMIT).unwrap().is_empty());
    }

    #[test]
    fn parallel_arcs_give_distinct_cycles() {
        let g = Digraph::new(2, vec![(0, 1), (0, 1), (1, 0)]).unwrap();
        assert_eq!(simple_cycles(&g, CYCLE_LIMIT).unwrap(), vec![vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn cycle_guard() {
        let g = Digraph::new(2, vec![(0, 1), (0, 1), (1, 0)]).unwrap();
        assert!(matches!(simple_cycles(&g, 1), Err(Error::Guard(_))));
    }

    #[test]
    fn completion_detects_short_cycle() {
        let g = Digraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        assert!(r2_completion(&g, &[1.0, -0.5], 1.0).is_none());
        assert!(r2_completion(&g, &[1.0, 0.5], 1.0).is_some());
    }
}
