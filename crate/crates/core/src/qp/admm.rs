//! Operator-splitting solver for `min ½xᵀPx + qᵀx  s.t.  lo <= Ax <= hi`
//! with diagonal `P`, followed by an active-set polish.

use log::{debug, trace};
use nalgebra::{DMatrix, DVector};

use super::{QpProblem, QpSettings, QpSolution, Status};
use crate::constraints::Sense;

const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 50;
const POLISH_GAP: usize = 50;
const POLISH_START: f64 = 1e-3;
const POLISH_REG: f64 = 1e-7;
const REFINE_STEPS: usize = 40;
const EQ_RHO_SCALE: f64 = 1e3;

type SparseRow = Vec<(usize, f64)>;

pub(super) struct Admm<'a> {
    problem: &'a QpProblem,
    settings: &'a QpSettings,
    n: usize,
    rows: Vec<SparseRow>,
    row_scale: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    pdiag: Vec<f64>,
    q: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl<'a> Admm<'a> {
    pub(super) fn new(problem: &'a QpProblem, settings: &'a QpSettings) -> Self {
        let n = problem.system.var_count();
        let mut pdiag = vec![0.0; n];
        let mut q = vec![0.0; n];
        for &(v, a) in &problem.anchors {
            pdiag[v] = 2.0;
            q[v] = -2.0 * a;
        }
        let m = problem.system.row_count();
        let mut rows = Vec::with_capacity(m);
        let mut row_scale = Vec::with_capacity(m);
        let mut lo = Vec::with_capacity(m);
        let mut hi = Vec::with_capacity(m);
        for row in problem.system.rows() {
            let s = 1.0 / row.terms.iter().fold(0.0f64, |m, &(_, c)| m.max(c.abs()));
            rows.push(row.terms.iter().map(|&(v, c)| (v, c * s)).collect());
            row_scale.push(s);
            let b = row.rhs * s;
            let (l, h) = match row.sense {
                Sense::Ge => (b, f64::INFINITY),
                Sense::Le => (f64::NEG_INFINITY, b),
                Sense::Eq => (b, b),
            };
            lo.push(l);
            hi.push(h);
        }
        Admm { problem, settings, n, rows, row_scale, lo, hi, pdiag, q }
    }

    fn is_eq(&self, r: usize) -> bool {
        self.lo[r] == self.hi[r]
    }

    fn ax(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(v, c)| c * x[v]).sum()).collect()
    }

    fn aty(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &yr) in self.rows.iter().zip(y) {
            if yr != 0.0 {
                for &(v, c) in row {
                    out[v] += c * yr;
                }
            }
        }
        out
    }

    fn rho_vec(&self, rho: f64) -> Vec<f64> {
        let s = self.settings;
        (0..self.rows.len())
            .map(|r| if self.is_eq(r) { (rho * EQ_RHO_SCALE).clamp(s.rho_min, s.rho_max * EQ_RHO_SCALE) } else { rho })
            .collect()
    }

    fn factor(&self, rho: &[f64]) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
        let n = self.n;
        let mut k = DMatrix::<f64>::zeros(n, n);
        for v in 0..n {
            k[(v, v)] = self.pdiag[v] + self.settings.sigma;
        }
        for (row, &rr) in self.rows.iter().zip(rho) {
            for &(i, ci) in row {
                for &(j, cj) in row {
                    k[(i, j)] += rr * ci * cj;
                }
            }
        }
        k.cholesky().expect("P + sigma I + A'RA is positive definite")
    }

    pub(super) fn run(self) -> QpSolution {
        let n = self.n;
        let m = self.rows.len();
        let st = self.settings;
        let mut x = vec![0.0; n];
        for &(v, a) in &self.problem.anchors {
            x[v] = a;
        }
        if m == 0 {
            return self.finish(x, vec![], 0, Status::Optimal, false);
        }
        let mut z: Vec<f64> = self.ax(&x).iter().enumerate().map(|(r, &v)| v.clamp(self.lo[r], self.hi[r])).collect();
        let mut y = vec![0.0; m];
        let mut rho = st.rho.clamp(st.rho_min, st.rho_max);
        let mut rho_v = self.rho_vec(rho);
        let mut chol = self.factor(&rho_v);
        let mut last_polish: Option<(usize, Vec<(usize, bool)>)> = None;
        let alpha = st.alpha;

        let mut rhs = DVector::<f64>::zeros(n);
        for k in 1..=st.max_iter {
            let w: Vec<f64> = (0..m).map(|r| rho_v[r] * z[r] - y[r]).collect();
            let atw = self.aty(&w);
            for v in 0..n {
                rhs[v] = st.sigma * x[v] - self.q[v] + atw[v];
            }
            let xt = chol.solve(&rhs);
            let zt = self.ax(xt.as_slice());
            let mut dy = vec![0.0; m];
            for v in 0..n {
                x[v] = alpha * xt[v] + (1.0 - alpha) * x[v];
            }
            for r in 0..m {
                let zrel = alpha * zt[r] + (1.0 - alpha) * z[r];
                let znew = (zrel + y[r] / rho_v[r]).clamp(self.lo[r], self.hi[r]);
                dy[r] = rho_v[r] * (zrel - znew);
                y[r] += dy[r];
                z[r] = znew;
            }

            if k % CHECK_EVERY != 0 && k != st.max_iter {
                continue;
            }
            let ax = self.ax(&x);
            let aty = self.aty(&y);
            let prim = ax.iter().zip(&z).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            let px: Vec<f64> = (0..n).map(|v| self.pdiag[v] * x[v]).collect();
            let dual = (0..n).fold(0.0f64, |acc, v| acc.max((px[v] + self.q[v] + aty[v]).abs()));
            let prim_scale = inf_norm(&ax).max(inf_norm(&z));
            let dual_scale = inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&self.q));
            let eps_p = st.eps_abs + st.eps_rel * prim_scale;
            let eps_d = st.eps_abs + st.eps_rel * dual_scale;
            trace!("iter {k}: prim {prim:.3e} dual {dual:.3e} rho {rho:.3e}");

            if prim <= eps_p && dual <= eps_d {
                if st.polish {
                    if let Some((px, py)) = self.polish(&x, &z, &y) {
                        return self.finish(px, py, k, Status::Optimal, true);
                    }
                }
                return self.finish(x, y, k, Status::Optimal, false);
            }
            if self.certifies_infeasibility(&dy) {
                debug!("primal infeasibility certificate at iteration {k}");
                return self.finish(x, y, k, Status::Infeasible, false);
            }
            if st.polish && prim <= POLISH_START * (1.0 + prim_scale) && dual <= POLISH_START * (1.0 + dual_scale) {
                let signature = self.active_set(&z, &y);
                let due = match &last_polish {
                    None => true,
                    Some((at, sig)) => k >= at + POLISH_GAP && *sig != signature,
                };
                if due {
                    if let Some((px, py)) = self.polish(&x, &z, &y) {
                        return self.finish(px, py, k, Status::Optimal, true);
                    }
                    last_polish = Some((k, signature));
                }
            }
            if k % ADAPT_EVERY == 0 && prim > 0.0 && dual > 0.0 {
                let ratio = ((prim / prim_scale.max(1e-30)) / (dual / dual_scale.max(1e-30))).sqrt();
                let candidate = (rho * ratio).clamp(st.rho_min, st.rho_max);
                if candidate > 5.0 * rho || candidate < rho / 5.0 {
                    rho = candidate;
                    rho_v = self.rho_vec(rho);
                    chol = self.factor(&rho_v);
                }
            }
        }
        if st.polish {
            if let Some((px, py)) = self.polish(&x, &z, &y) {
                return self.finish(px, py, st.max_iter, Status::Optimal, true);
            }
        }
        self.finish(x, y, st.max_iter, Status::IterationLimit, false)
    }

    fn certifies_infeasibility(&self, dy: &[f64]) -> bool {
        let eps = self.settings.eps_infeasible;
        let ndy = inf_norm(dy);
        if ndy < 1e-30 {
            return false;
        }
        if inf_norm(&self.aty(dy)) > eps * ndy {
            return false;
        }
        let mut support = 0.0;
        for (r, &d) in dy.iter().enumerate() {
            if d > 0.0 {
                if self.hi[r].is_infinite() {
                    if d > eps * ndy {
                        return false;
                    }
                } else {
                    support += self.hi[r] * d;
                }
            } else if d < 0.0 {
                if self.lo[r].is_infinite() {
                    if -d > eps * ndy {
                        return false;
                    }
                } else {
                    support += self.lo[r] * d;
                }
            }
        }
        support < -eps * ndy
    }

    /// Rows treated as binding: all equalities plus inequalities whose
    /// multiplier sign points at a bound. `true` marks the upper bound.
    fn active_set(&self, z: &[f64], y: &[f64]) -> Vec<(usize, bool)> {
        let mut act = Vec::new();
        for r in 0..self.rows.len() {
            if self.is_eq(r) || (self.lo[r].is_finite() && z[r] - self.lo[r] < -y[r]) {
                act.push((r, false));
            } else if self.hi[r].is_finite() && self.hi[r] - z[r] < y[r] {
                act.push((r, true));
            }
        }
        act
    }

    /// Solves the KKT system restricted to the guessed active set, refining
    /// from the current iterate. Accepted only if the result is a KKT point.
    fn polish(&self, x: &[f64], z: &[f64], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let act = self.active_set(z, y);
        let k = act.len();
        let dim = n + k;
        let mut kreg = DMatrix::<f64>::zeros(dim, dim);
        for v in 0..n {
            kreg[(v, v)] = self.pdiag[v] + POLISH_REG;
        }
        let mut rhs = vec![0.0; dim];
        for v in 0..n {
            rhs[v] = -self.q[v];
        }
        for (i, &(r, upper)) in act.iter().enumerate() {
            for &(v, c) in &self.rows[r] {
                kreg[(v, n + i)] = c;
                kreg[(n + i, v)] = c;
            }
            kreg[(n + i, n + i)] = -POLISH_REG;
            rhs[n + i] = if upper { self.hi[r] } else { self.lo[r] };
        }
        let lu = kreg.lu();
        let mut sol = DVector::<f64>::zeros(dim);
        for v in 0..n {
            sol[v] = x[v];
        }
        for (i, &(r, _)) in act.iter().enumerate() {
            sol[n + i] = y[r];
        }
        let rhs_norm = inf_norm(&rhs);
        for _ in 0..REFINE_STEPS {
            let res = self.kkt_residual(&act, sol.as_slice(), &rhs);
            if inf_norm(res.as_slice()) <= 1e-14 * (1.0 + rhs_norm) {
                break;
            }
            let step = lu.solve(&res)?;
            sol += step;
        }
        let xs: Vec<f64> = sol.as_slice()[..n].to_vec();
        if xs.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut ys = vec![0.0; self.rows.len()];
        for (i, &(r, _)) in act.iter().enumerate() {
            ys[r] = sol[n + i];
        }
        let tol = self.settings.eps_abs;
        let ax = self.ax(&xs);
        for (r, &v) in ax.iter().enumerate() {
            if self.lo[r] - v > tol || v - self.hi[r] > tol {
                return None;
            }
        }
        let aty = self.aty(&ys);
        for v in 0..n {
            if (self.pdiag[v] * xs[v] + self.q[v] + aty[v]).abs() > tol {
                return None;
            }
        }
        for &(r, upper) in &act {
            if self.is_eq(r) {
                continue;
            }
            if (upper && ys[r] < -tol) || (!upper && ys[r] > tol) {
                return None;
            }
        }
        Some((xs, ys))
    }

    /// `rhs - K sol` for the unregularized reduced KKT matrix.
    fn kkt_residual(&self, act: &[(usize, bool)], sol: &[f64], rhs: &[f64]) -> DVector<f64> {
        let n = self.n;
        let mut res = DVector::from_column_slice(rhs);
        for v in 0..n {
            res[v] -= self.pdiag[v] * sol[v];
        }
        for (i, &(r, _)) in act.iter().enumerate() {
            let yi = sol[n + i];
            let mut ax = 0.0;
            for &(v, c) in &self.rows[r] {
                res[v] -= c * yi;
                ax += c * sol[v];
            }
            res[n + i] -= ax;
        }
        res
    }

    fn finish(&self, x: Vec<f64>, y_scaled: Vec<f64>, iterations: usize, status: Status, polished: bool) -> QpSolution {
        let sys = &self.problem.system;
        let y: Vec<f64> = y_scaled.iter().zip(&self.row_scale).map(|(y, s)| y * s).collect();
        let mut grad = self.problem.gradient(&x);
        for (row, &yr) in sys.rows().iter().zip(&y) {
            for &(v, c) in &row.terms {
                grad[v] += c * yr;
            }
        }
        QpSolution {
            objective: self.problem.objective(&x),
            primal_residual: sys.max_violation(&x),
            dual_residual: inf_norm(&grad),
            values: x,
            status,
            iterations,
            polished,
        }
    }
}
