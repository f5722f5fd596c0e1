//! Sparse linear constraint systems over named variables.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// What a variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarRole {
    /// Perturbed weight of an element.
    Weight(usize),
    /// Component of a lifted parameter vector.
    Param(usize),
    /// Length of an arc in an auxiliary graph.
    ArcLength(usize),
    /// Path-length bound between an ordered node pair.
    Distance(usize, usize),
    /// Node potential (distance label).
    Potential(usize),
}

impl fmt::Display for VarRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarRole::Weight(e) => write!(f, "w{e}"),
            VarRole::Param(k) => write!(f, "t{k}"),
            VarRole::ArcLength(a) => write!(f, "l{a}"),
            VarRole::Distance(x, y) => write!(f, "d{x}_{y}"),
            VarRole::Potential(v) => write!(f, "p{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        })
    }
}

/// Which rule generated a row. Used for per-family slack reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Binding,
    Circuit,
    ArcBound,
    Triangle,
    CycleMargin,
    Cycle,
    Root,
    TreeArc,
    NonTreeArc,
    Competitor,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Binding => "binding",
            Family::Circuit => "circuit",
            Family::ArcBound => "arc-bound",
            Family::Triangle => "triangle",
            Family::CycleMargin => "cycle-margin",
            Family::Cycle => "cycle",
            Family::Root => "root",
            Family::TreeArc => "tree-arc",
            Family::NonTreeArc => "non-tree-arc",
            Family::Competitor => "competitor",
        }
    }
}

/// Affine form `Σ coeff·var + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(v: usize) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn scaled(&self, k: f64) -> Self {
        LinExpr { terms: self.terms.iter().map(|&(v, c)| (v, c * k)).collect(), constant: self.constant * k }
    }

    pub fn add(&mut self, other: &LinExpr) {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Sorted by variable id, no duplicates, no zero coefficients.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub family: Family,
}

impl Row {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Non-negative iff satisfied. Equality rows report minus the absolute gap.
    pub fn slack(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.sense {
            Sense::Ge => lhs - self.rhs,
            Sense::Le => self.rhs - lhs,
            Sense::Eq => -(lhs - self.rhs).abs(),
        }
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        (-self.slack(values)).max(0.0)
    }
}

fn compact_terms(terms: impl IntoIterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, c) in terms {
        *merged.entry(v).or_insert(0.0) += c;
    }
    merged.into_iter().filter(|&(_, c)| c != 0.0).collect()
}

fn constant_holds(sense: Sense, rhs: f64) -> bool {
    const TOL: f64 = 1e-12;
    match sense {
        Sense::Ge => 0.0 >= rhs - TOL,
        Sense::Le => 0.0 <= rhs + TOL,
        Sense::Eq => rhs.abs() <= TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSystem {
    roles: Vec<VarRole>,
    rows: Vec<Row>,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, role: VarRole) -> usize {
        self.roles.push(role);
        self.roles.len() - 1
    }

    pub fn var_count(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[VarRole] {
        &self.roles
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn count_family(&self, family: Family) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }

    /// Adds `Σ terms  sense  rhs`. A row whose terms cancel is dropped when the
    /// constant comparison holds and rejected as infeasible otherwise.
    pub fn push(
        &mut self,
        terms: impl IntoIterator<Item = (usize, f64)>,
        sense: Sense,
        rhs: f64,
        family: Family,
    ) -> Result<()> {
        let terms = compact_terms(terms);
        if let Some(&(v, _)) = terms.iter().find(|&&(v, _)| v >= self.roles.len()) {
            return Err(Error::Precondition(format!("row references undeclared variable {v}")));
        }
        if terms.is_empty() {
            if constant_holds(sense, rhs) {
                return Ok(());
            }
            return Err(Error::Infeasible(format!("{} row reduces to 0 {sense} {rhs}", family.name())));
        }
        self.rows.push(Row { terms, sense, rhs, family });
        Ok(())
    }

    /// Adds `expr  sense  rhs`, moving the constant to the right.
    pub fn push_expr(&mut self, expr: &LinExpr, sense: Sense, rhs: f64, family: Family) -> Result<()> {
        self.push(expr.terms.iter().copied(), sense, rhs - expr.constant, family)
    }

    pub fn max_violation(&self, values: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.violation(values)).fold(0.0, f64::max)
    }

    /// Smallest slack per family; families without rows are absent.
    pub fn worst_slack_by_family(&self, values: &[f64]) -> BTreeMap<Family, f64> {
        let mut out: BTreeMap<Family, f64> = BTreeMap::new();
        for row in &self.rows {
            let s = row.slack(values);
            out.entry(row.family).and_modify(|w| *w = w.min(s)).or_insert(s);
        }
        out
    }

    /// Replaces every weight variable `w_e` by `Σ_k features[e][k]·t_k`.
    ///
    /// Parameters become variables `0..F`; the remaining non-weight variables
    /// follow in their original order. The second return value maps old
    /// variable ids to new ones (`None` for substituted weights).
    pub fn lift(&self, features: &[Vec<f64>]) -> Result<(ConstraintSystem, Vec<Option<usize>>)> {
        let dim = features.first().map_or(0, Vec::len);
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: bad.len() });
        }
        let mut lifted = ConstraintSystem::new();
        for k in 0..dim {
            lifted.add_var(VarRole::Param(k));
        }
        let mut map = vec![None; self.roles.len()];
        for (v, role) in self.roles.iter().enumerate() {
            match *role {
                VarRole::Weight(e) => {
                    if e >= features.len() {
                        return Err(Error::Dimension { expected: e + 1, got: features.len() });
                    }
                }
                other => map[v] = Some(lifted.add_var(other)),
            }
        }
        for row in &self.rows {
            let mut terms = Vec::with_capacity(row.terms.len() + dim);
            for &(v, c) in &row.terms {
                match (self.roles[v], map[v]) {
                    (VarRole::Weight(e), _) => {
                        terms.extend(features[e].iter().enumerate().map(|(k, &f)| (k, c * f)));
                    }
                    (_, Some(nv)) => terms.push((nv, c)),
                    (_, None) => unreachable!("non-weight variables are always mapped"),
                }
            }
            lifted.push(terms, row.sense, row.rhs, row.family)?;
        }
        Ok((lifted, map))
    }
}

/// One row per line: `coeff*name ... SENSE rhs`.
impl fmt::Display for ConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            for (i, &(v, c)) in row.terms.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{}*{}", c, self.roles[v])?;
            }
            writeln!(f, " {} {}", row.sense, row.rhs)?;
        }
        Ok(())
    }
}
