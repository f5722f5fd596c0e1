//! Two-matroid inverse problem through the exchange graph.

use super::{check_delta, Completion, Formulation, InverseSolution};
use crate::constraints::{ConstraintSystem, LinExpr, VarRole};
use crate::cyclebound::{r2_constraints, SymbolicDigraph};
use crate::error::{Error, Result};
use crate::graph::{membership, Digraph};
use crate::matroid::{is_basis, Matroid};
use crate::qp::QpSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeSide {
    /// `(x, y)` with `x ∈ B`, `B − x + y` independent in the first matroid.
    First,
    /// `(y, x)` with `y ∉ B`, `B − x + y` independent in the second matroid.
    Second,
}

/// Bipartite digraph over the ground set. Arc lengths are `+w(tail)` on
/// first-matroid arcs and `−w(tail)` on second-matroid arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeGraph {
    pub ground_size: usize,
    pub basis: Vec<usize>,
    pub arcs: Vec<(usize, usize)>,
    pub sides: Vec<ExchangeSide>,
}

impl ExchangeGraph {
    pub fn digraph(&self) -> Digraph {
        Digraph::new(self.ground_size, self.arcs.clone()).expect("exchange arcs stay inside the ground set")
    }

    /// Attaches lengths built from per-element weight expressions.
    pub fn symbolic(&self, weights: &[LinExpr]) -> SymbolicDigraph {
        let lengths = self
            .arcs
            .iter()
            .zip(&self.sides)
            .map(|(&(tail, _), side)| match side {
                ExchangeSide::First => weights[tail].clone(),
                ExchangeSide::Second => weights[tail].scaled(-1.0),
            })
            .collect();
        SymbolicDigraph::new(self.digraph(), lengths).expect("one length per arc")
    }

    pub fn numeric_lengths(&self, w: &[f64]) -> Vec<f64> {
        self.arcs
            .iter()
            .zip(&self.sides)
            .map(|(&(tail, _), side)| match side {
                ExchangeSide::First => w[tail],
                ExchangeSide::Second => -w[tail],
            })
            .collect()
    }
}

fn swapped(basis: &[usize], out: usize, inn: usize) -> Vec<usize> {
    basis.iter().map(|&e| if e == out { inn } else { e }).collect()
}

pub fn exchange_graph<A, B>(m1: &A, m2: &B, basis: &[usize]) -> Result<ExchangeGraph>
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
    if !is_basis(m1, basis) || !is_basis(m2, basis) {
        return Err(Error::Precondition("designated set is not a common basis".into()));
    }
    let mut sorted = basis.to_vec();
    sorted.sort_unstable();
    let inside = membership(&sorted, n);
    let outside: Vec<usize> = (0..n).filter(|&e| !inside[e]).collect();
    let mut arcs = Vec::new();
    let mut sides = Vec::new();
    for &x in &sorted {
        for &y in &outside {
            if m1.is_independent(&swapped(&sorted, x, y)) {
                arcs.push((x, y));
                sides.push(ExchangeSide::First);
            }
        }
    }
    for &y in &outside {
        for &x in &sorted {
            if m2.is_independent(&swapped(&sorted, x, y)) {
                arcs.push((y, x));
                sides.push(ExchangeSide::Second);
            }
        }
    }
    Ok(ExchangeGraph { ground_size: n, basis: sorted, arcs, sides })
}

/// `fixed[e] = Some(c)` pins element `e` to the constant `c`; such elements get
/// no variable and are not part of the objective. Returned weight variables
/// cover the free elements in order.
pub(crate) fn formulate_with_fixed<A, B>(
    m1: &A,
    m2: &B,
    basis: &[usize],
    delta: f64,
    fixed: &[Option<f64>],
) -> Result<Formulation>
where
    A: Matroid + ?Sized,
    B: Matroid + ?Sized,
{
    check_delta(delta)?;
    let xg = exchange_graph(m1, m2, basis)?;
    let mut system = ConstraintSystem::new();
    let mut weight_vars = Vec::new();
    let exprs: Vec<LinExpr> = (0..xg.ground_size)
        .map(|e| match fixed.get(e).copied().flatten() {
            Some(c) => LinExpr::constant(c),
            None => {
                let v = system.add_var(VarRole::Weight(e));
                weight_vars.push(v);
                LinExpr::var(v)
            }
        })
        .collect();
    let graph = xg.symbolic(&exprs);
    let layout = r2_constraints(&mut system, &graph, delta)?;
    Ok(Formulation { system, weight_vars, negated: false, completion: Completion::Cycles { graph, layout, delta } })
}

pub fn formulate_intersection<A, B>(m1: &A, m2: &B, basis: &[usize], delta: f64) -> Result<Formulation>
where
    A: Matroid + ?Sized,
    B: Matroid + ?Sized,
{
    formulate_with_fixed(m1, m2, basis, delta, &[])
}

pub fn inverse_matroid_intersection<A, B>(
    m1: &A,
    m2: &B,
    w: &[f64],
    basis: &[usize],
    delta: f64,
    settings: &QpSettings,
) -> Result<InverseSolution>
where
    A: Matroid + ?Sized,
    B: Matroid + ?Sized,
{
    if w.len() != m1.ground_size() {
        return Err(Error::Dimension { expected: m1.ground_size(), got: w.len() });
    }
    formulate_intersection(m1, m2, basis, delta)?.solve(w, settings)
}
