//! Least-distance quadratic programs: minimize `Σ (x_v - a_v)²` over the
//! anchored variables subject to a [`ConstraintSystem`]. Unanchored
//! variables carry no objective weight.

mod admm;
mod kkt;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSystem;
use crate::error::{Error, Result};

pub use kkt::{check_kkt, KktReport};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub system: ConstraintSystem,
    /// `(variable, anchor value)`; each variable at most once.
    pub anchors: Vec<(usize, f64)>,
}

impl QpProblem {
    pub fn new(system: ConstraintSystem, anchors: Vec<(usize, f64)>) -> Result<Self> {
        let mut seen = vec![false; system.var_count()];
        for &(v, a) in &anchors {
            if v >= seen.len() {
                return Err(Error::Precondition(format!("anchor on undeclared variable {v}")));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Precondition(format!("variable {v} anchored twice")));
            }
            if !a.is_finite() {
                return Err(Error::Precondition(format!("anchor of variable {v} is not finite")));
            }
        }
        Ok(QpProblem { system, anchors })
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        self.anchors.iter().map(|&(v, a)| (values[v] - a).powi(2)).sum()
    }

    /// Gradient of the objective.
    pub fn gradient(&self, values: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.system.var_count()];
        for &(v, a) in &self.anchors {
            g[v] = 2.0 * (values[v] - a);
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub rho: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub eps_infeasible: f64,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            max_iter: 200_000,
            sigma: 1e-6,
            alpha: 1.6,
            rho: 0.1,
            rho_min: 1e-6,
            rho_max: 1e6,
            eps_infeasible: 1e-6,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::IterationLimit => "iteration-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: Status,
    /// Largest constraint violation at `values`.
    pub primal_residual: f64,
    /// Infinity norm of the Lagrangian gradient with the solver's multipliers.
    pub dual_residual: f64,
    pub iterations: usize,
    pub polished: bool,
}

pub fn solve(p: &QpProblem) -> QpSolution {
    solve_with(p, &QpSettings::default())
}

pub fn solve_with(p: &QpProblem, settings: &QpSettings) -> QpSolution {
    admm::Admm::new(p, settings).run()
}
