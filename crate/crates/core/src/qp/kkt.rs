//! Optimality audit that refits multipliers from scratch.

use nalgebra::{DMatrix, DVector};

use super::{QpProblem, QpSolution};
use crate::constraints::Sense;

/// Rows with slack at most this are treated as binding.
const ACTIVE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `‖∇f(x) − Σ λ_r a_r‖∞` for the best sign-feasible multipliers.
    pub stationarity: f64,
    /// Largest `|λ_r · slack_r|`.
    pub complementarity: f64,
    pub primal_violation: f64,
    pub active_rows: usize,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.stationarity <= tol && self.complementarity <= tol && self.primal_violation <= tol
    }
}

/// Fits multipliers for the rows binding at `s.values` by sign-constrained
/// least squares and reports the residual KKT conditions.
pub fn check_kkt(p: &QpProblem, s: &QpSolution) -> KktReport {
    let x = &s.values;
    let grad = p.gradient(x);
    let primal_violation = p.system.max_violation(x);
    let n = grad.len();

    // Columns are oriented so that every sign-constrained multiplier is >= 0.
    let mut cols: Vec<(usize, f64, bool)> = Vec::new();
    for (r, row) in p.system.rows().iter().enumerate() {
        let slack = row.slack(x);
        match row.sense {
            Sense::Eq => cols.push((r, 1.0, true)),
            Sense::Ge if slack <= ACTIVE_SLACK => cols.push((r, 1.0, false)),
            Sense::Le if slack <= ACTIVE_SLACK => cols.push((r, -1.0, false)),
            _ => {}
        }
    }
    if cols.is_empty() {
        return KktReport { stationarity: inf_norm(&grad), complementarity: 0.0, primal_violation, active_rows: 0 };
    }
    let k = cols.len();
    let mut m = DMatrix::<f64>::zeros(n, k);
    for (j, &(r, sign, _)) in cols.iter().enumerate() {
        for &(v, c) in &p.system.rows()[r].terms {
            m[(v, j)] = sign * c;
        }
    }
    let free: Vec<bool> = cols.iter().map(|c| c.2).collect();
    let g = DVector::from_column_slice(&grad);
    let lambda = nnls_gram(&m, &g, &free);
    let fit = &m * &lambda;
    let stationarity = inf_norm((g - fit).as_slice());
    let complementarity = cols
        .iter()
        .zip(lambda.iter())
        .map(|(&(r, _, _), &l)| (l * p.system.rows()[r].slack(x)).abs())
        .fold(0.0, f64::max);
    KktReport { stationarity, complementarity, primal_violation, active_rows: k }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Lawson–Hanson on the normal equations: minimize `‖Mλ − g‖²` with
/// `λ_j >= 0` unless `free[j]`.
fn nnls_gram(m: &DMatrix<f64>, g: &DVector<f64>, free: &[bool]) -> DVector<f64> {
    let k = m.ncols();
    let gram = m.transpose() * m;
    let h = m.transpose() * g;
    let ridge = 1e-13 * (1.0 + (0..k).map(|i| gram[(i, i)]).fold(0.0, f64::max));
    let solve = |passive: &[usize]| -> DVector<f64> {
        let p = passive.len();
        let mut out = DVector::zeros(k);
        if p == 0 {
            return out;
        }
        let mut sub = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for (a, &i) in passive.iter().enumerate() {
            rhs[a] = h[i];
            for (b, &j) in passive.iter().enumerate() {
                sub[(a, b)] = gram[(i, j)];
            }
            sub[(a, a)] += ridge;
        }
        let chol = sub.clone().cholesky().expect("ridge keeps the Gram block positive definite");
        let mut sol = chol.solve(&rhs);
        // One refinement step against the ridge bias.
        let res = &rhs - &sub * &sol + sol.scale(ridge);
        sol += chol.solve(&res);
        for (a, &i) in passive.iter().enumerate() {
            out[i] = sol[a];
        }
        out
    };

    // Warm start from the clipped unconstrained fit.
    let mut lambda = solve(&(0..k).collect::<Vec<_>>());
    for i in 0..k {
        if !free[i] && lambda[i] < 0.0 {
            lambda[i] = 0.0;
        }
    }
    let mut in_p: Vec<bool> = (0..k).map(|i| free[i] || lambda[i] > 0.0).collect();
    let tol = 1e-12 * (1.0 + h.amax());
    for _outer in 0..(3 * k + 10) {
        // Inner loop: move toward the unconstrained solution on the passive set
        // until it is sign-feasible.
        loop {
            let passive: Vec<usize> = (0..k).filter(|&i| in_p[i]).collect();
            let s = solve(&passive);
            let blocking: Vec<usize> = passive.iter().copied().filter(|&i| !free[i] && s[i] <= 0.0).collect();
            if blocking.is_empty() {
                lambda = s;
                break;
            }
            let mut step = 1.0f64;
            for &i in &blocking {
                let denom = lambda[i] - s[i];
                if denom > 0.0 {
                    step = step.min(lambda[i] / denom);
                }
            }
            for &i in &passive {
                lambda[i] += step * (s[i] - lambda[i]);
            }
            for &i in &passive {
                if !free[i] && lambda[i] <= 1e-15 {
                    lambda[i] = 0.0;
                    in_p[i] = false;
                }
            }
        }
        let grad = &h - &gram * &lambda;
        let candidate = (0..k).filter(|&i| !in_p[i] && grad[i] > tol).max_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        match candidate {
            Some(j) => in_p[j] = true,
            None => break,
        }
    }
    lambda
}
