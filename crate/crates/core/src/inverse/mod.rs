//! Formulation builders and solve drivers for every supported structure.

pub mod arborescence;
pub mod flow;
pub mod intersection;
pub mod matching;
pub mod matroid;
pub mod sptree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSystem, Family, LinExpr};
use crate::cyclebound::{R2Layout, SymbolicDigraph};
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::qp::{self, QpProblem, QpSettings, QpSolution, Status};

/// Whether the designated structure should be the heaviest or the lightest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptSense {
    #[default]
    Max,
    Min,
}

impl OptSense {
    pub fn sign(self) -> f64 {
        match self {
            OptSense::Max => 1.0,
            OptSense::Min => -1.0,
        }
    }
}

/// How auxiliary variables are filled in for a given weight vector.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Completion {
    None,
    Cycles { graph: SymbolicDigraph, layout: R2Layout, delta: f64 },
    Potentials { graph: Digraph, root: usize, tree: Vec<usize>, vars: Vec<usize> },
}

/// A constraint system plus the map from instance elements to weight
/// variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Formulation {
    pub system: ConstraintSystem,
    /// Variable of each instance element.
    pub weight_vars: Vec<usize>,
    /// Variables hold negated weights (minimization handled as maximization).
    pub negated: bool,
    pub(crate) completion: Completion,
}

/// Perturbed weights and the solver report behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub status: Status,
    pub qp: QpSolution,
    pub problem: QpProblem,
    pub worst_slack: BTreeMap<Family, f64>,
}

impl InverseSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

impl Formulation {
    fn sign(&self) -> f64 {
        if self.negated {
            -1.0
        } else {
            1.0
        }
    }

    pub fn problem(&self, w: &[f64]) -> Result<QpProblem> {
        if w.len() != self.weight_vars.len() {
            return Err(Error::Dimension { expected: self.weight_vars.len(), got: w.len() });
        }
        let s = self.sign();
        let anchors = self.weight_vars.iter().zip(w).map(|(&v, &x)| (v, s * x)).collect();
        QpProblem::new(self.system.clone(), anchors)
    }

    pub fn solve(&self, w: &[f64], settings: &QpSettings) -> Result<InverseSolution> {
        let problem = self.problem(w)?;
        let sol = qp::solve_with(&problem, settings);
        let s = self.sign();
        let weights = self.weight_vars.iter().map(|&v| s * sol.values[v]).collect();
        if sol.status == Status::Infeasible {
            log::warn!("inverse program reported infeasible; this indicates an internal inconsistency");
        }
        Ok(InverseSolution {
            weights,
            objective: sol.objective,
            status: sol.status,
            worst_slack: self.system.worst_slack_by_family(&sol.values),
            qp: sol,
            problem,
        })
    }

    /// Full variable assignment for element weights `w`, with auxiliary
    /// variables completed. `None` when no completion satisfies the margin.
    pub fn complete(&self, w: &[f64]) -> Option<Vec<f64>> {
        let mut values = vec![0.0; self.system.var_count()];
        let s = self.sign();
        for (&v, &x) in self.weight_vars.iter().zip(w) {
            values[v] = s * x;
        }
        match &self.completion {
            Completion::None => {}
            Completion::Cycles { graph, layout, delta } => {
                if !layout.complete(graph, *delta, &mut values) {
                    return None;
                }
            }
            Completion::Potentials { graph, root, tree, vars } => {
                let d = sptree::tree_distances(graph, *root, tree, w)?;
                for (&v, &x) in vars.iter().zip(&d) {
                    values[v] = x;
                }
            }
        }
        Some(values)
    }

    /// Size summary used by the sizing checks.
    pub fn stats(&self) -> FormulationStats {
        FormulationStats {
            variables: self.system.var_count(),
            rows: self.system.row_count(),
            binding_rows: self.system.count_family(Family::Binding),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulationStats {
    pub variables: usize,
    pub rows: usize,
    pub binding_rows: usize,
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::Precondition(format!("delta must be finite and non-negative, got {delta}")));
    }
    Ok(())
}

pub(crate) fn weight_exprs(weight_vars: &[usize]) -> Vec<LinExpr> {
    weight_vars.iter().map(|&v| LinExpr::var(v)).collect()
}
