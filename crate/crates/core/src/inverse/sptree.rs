//! Inverse shortest-path tree with node potentials.

use log::warn;

use super::{check_delta, Completion, Formulation, InverseSolution};
use crate::constraints::{ConstraintSystem, Family, Sense, VarRole};
use crate::error::{Error, Result};
use crate::graph::{membership, Digraph};
use crate::inverse::arborescence::is_arborescence;
use crate::qp::QpSettings;

pub fn check_sp_tree(g: &Digraph, root: usize, tree: &[usize]) -> Result<()> {
    if !is_arborescence(g, root, tree) {
        return Err(Error::Precondition(format!("designated arcs are not a spanning out-tree from {root}")));
    }
    Ok(())
}

/// Length of the tree path from `root` to every node under `w`.
pub fn tree_distances(g: &Digraph, root: usize, tree: &[usize], w: &[f64]) -> Option<Vec<f64>> {
    let n = g.node_count();
    let mut parent_arc = vec![None; n];
    for &a in tree {
        parent_arc[g.arc(a).1] = Some(a);
    }
    let mut dist: Vec<Option<f64>> = vec![None; n];
    dist[root] = Some(0.0);
    fn resolve(
        v: usize,
        g: &Digraph,
        parent: &[Option<usize>],
        w: &[f64],
        dist: &mut [Option<f64>],
        depth: usize,
    ) -> Option<f64> {
        if let Some(d) = dist[v] {
            return Some(d);
        }
        if depth > parent.len() {
            return None;
        }
        let a = parent[v]?;
        let d = resolve(g.arc(a).0, g, parent, w, dist, depth + 1)? + w[a];
        dist[v] = Some(d);
        Some(d)
    }
    (0..n).map(|v| resolve(v, g, &parent_arc, w, &mut dist, 0)).collect()
}

/// Variables: one weight per arc, then one potential per node.
/// Rows: `p_r = 0`; `p_a + w_ab − p_b = 0` on tree arcs;
/// `p_a + w_ab − p_b >= delta` on the others.
pub fn formulate_sp_tree(g: &Digraph, root: usize, tree: &[usize], delta: f64) -> Result<Formulation> {
    check_delta(delta)?;
    check_sp_tree(g, root, tree)?;
    let mut system = ConstraintSystem::new();
    let weight_vars: Vec<usize> = (0..g.arc_count()).map(|a| system.add_var(VarRole::Weight(a))).collect();
    let pot: Vec<usize> = (0..g.node_count()).map(|v| system.add_var(VarRole::Potential(v))).collect();
    system.push([(pot[root], 1.0)], Sense::Eq, 0.0, Family::Root)?;
    let in_tree = membership(tree, g.arc_count());
    for (a, &(u, v)) in g.arcs().iter().enumerate() {
        let terms = [(pot[u], 1.0), (weight_vars[a], 1.0), (pot[v], -1.0)];
        if in_tree[a] {
            system.push(terms, Sense::Eq, 0.0, Family::TreeArc)?;
        } else {
            system.push(terms, Sense::Ge, delta, Family::NonTreeArc)?;
        }
    }
    Ok(Formulation {
        system,
        weight_vars,
        negated: false,
        completion: Completion::Potentials { graph: g.clone(), root, tree: tree.to_vec(), vars: pot },
    })
}

pub fn inverse_sp_tree(
    g: &Digraph,
    w: &[f64],
    root: usize,
    tree: &[usize],
    delta: f64,
    settings: &QpSettings,
) -> Result<InverseSolution> {
    if w.len() != g.arc_count() {
        return Err(Error::Dimension { expected: g.arc_count(), got: w.len() });
    }
    if let Some(a) = w.iter().position(|&x| x < 0.0) {
        return Err(Error::Precondition(format!("arc {a} has negative weight")));
    }
    let sol = formulate_sp_tree(g, root, tree, delta)?.solve(w, settings)?;
    if let Some(a) = sol.weights.iter().position(|&x| x < 0.0) {
        warn!("perturbed weight of arc {a} is negative ({})", sol.weights[a]);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_with_shortcut() -> Digraph {
        // r=0, a=1, b=2: r->a, a->b, r->b.
        Digraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn golden_shortcut() {
        let s =
            inverse_sp_tree(&chain_with_shortcut(), &[1.0, 1.0, 1.5], 0, &[0, 1], 1.0, &QpSettings::default()).unwrap();
        let want = [0.5, 0.5, 2.0];
        for (a, b) in s.weights.iter().zip(&want) {
            assert!((a - b).abs() < 1e-7, "{:?}", s.weights);
        }
        assert!((s.objective - 0.75).abs() < 1e-7);
    }

    #[test]
    fn tree_only_graph_is_untouched() {
        let g = Digraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let s = inverse_sp_tree(&g, &[2.0, 3.0], 0, &[0, 1], 1.0, &QpSettings::default()).unwrap();
        assert!((s.weights[0] - 2.0).abs() < 1e-9 && (s.weights[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn distances_follow_tree() {
        let d = tree_distances(&chain_with_shortcut(), 0, &[0, 1], &[1.0, 2.0, 10.0]).unwrap();
        assert_eq!(d, vec![0.0, 1.0, 3.0]);
    }

    #[test]
    fn hand_built_optimal_weights_satisfy_rows() {
        // Under w' = (1, 1, 3) the chain beats the shortcut by 1.
        let f = formulate_sp_tree(&chain_with_shortcut(), 0, &[0, 1], 1.0).unwrap();
        let values = f.complete(&[1.0, 1.0, 3.0]).unwrap();
        assert!(f.system.max_violation(&values) == 0.0);
    }

    #[test]
    fn rejects_non_tree_and_negative_weights() {
        let g = chain_with_shortcut();
        assert!(formulate_sp_tree(&g, 0, &[1, 2], 1.0).is_err());
        assert!(inverse_sp_tree(&g, &[-1.0, 1.0, 1.0], 0, &[0, 1], 1.0, &QpSettings::default()).is_err());
    }
}
