//! Single-matroid inverse problem: circuit-exchange rows.

use super::{check_delta, Completion, Formulation, InverseSolution};
use crate::constraints::{ConstraintSystem, Family, Sense, VarRole};
use crate::error::{Error, Result};
use crate::graph::membership;
use crate::matroid::{circuit, is_basis, Matroid};
use crate::qp::QpSettings;

/// Rows `w(e) − w(f) >= delta` for every `f` outside `basis` and every other
/// element `e` of the circuit `C_B(f)`.
pub fn formulate_matroid<M: Matroid + ?Sized>(m: &M, basis: &[usize], delta: f64) -> Result<Formulation> {
    check_delta(delta)?;
    if !is_basis(m, basis) {
        return Err(Error::Precondition("designated set is not a basis of the matroid".into()));
    }
    let n = m.ground_size();
    let mut system = ConstraintSystem::new();
    let weight_vars: Vec<usize> = (0..n).map(|e| system.add_var(VarRole::Weight(e))).collect();
    let inside = membership(basis, n);
    let mut sorted = basis.to_vec();
    sorted.sort_unstable();
    for f in (0..n).filter(|&f| !inside[f]) {
        for e in circuit(m, &sorted, f)? {
            if e != f {
                system.push([(weight_vars[e], 1.0), (weight_vars[f], -1.0)], Sense::Ge, delta, Family::Circuit)?;
            }
        }
    }
    Ok(Formulation { system, weight_vars, negated: false, completion: Completion::None })
}

pub fn inverse_matroid<M: Matroid + ?Sized>(
    m: &M,
    w: &[f64],
    basis: &[usize],
    delta: f64,
    settings: &QpSettings,
) -> Result<InverseSolution> {
    if w.len() != m.ground_size() {
        return Err(Error::Dimension { expected: m.ground_size(), got: w.len() });
    }
    formulate_matroid(m, basis, delta)?.solve(w, settings)
}
