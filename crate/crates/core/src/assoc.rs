//! User association: the max-min LP relaxation and its rounding.

use crate::convex::{solve, AffineExpr, Constraint, ConvexProgram, SolveStatus, SolverOptions};
use crate::error::{Error, Result};

/// Fractional association in `[user][slot]` order with its LP value.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationLp {
    pub assoc: Vec<Vec<f64>>,
    pub zeta: f64,
    pub status: SolveStatus,
}

/// Maximizes ζ s.t. ζ ≤ (1/N) Σ_n a_k[n] R_k[n], Σ_k a_k[n] ≤ 1, 0 ≤ a ≤ 1.
///
/// Pairs with R ≤ 0 carry no variable and stay at zero.
pub fn solve_association_lp(rates: &[Vec<f64>]) -> Result<AssociationLp> {
    let k_users = rates.len();
    let n_slots = rates.first().map_or(0, Vec::len);
    if let Some(row) = rates.iter().find(|r| r.len() != n_slots) {
        return Err(Error::LengthMismatch { expected: n_slots, actual: row.len() });
    }
    let mut assoc = vec![vec![0.0; n_slots]; k_users];
    let r_max = rates.iter().flatten().copied().fold(0.0, f64::max);
    if k_users == 0 || n_slots == 0 || r_max <= 0.0 || rates.iter().any(|r| r.iter().all(|&v| v <= 0.0)) {
        // Some user can never be served, so ζ = 0 whatever the association.
        return Ok(AssociationLp { assoc, zeta: 0.0, status: SolveStatus::Optimal });
    }

    let mut prog = ConvexProgram::default();
    let zeta = prog.add_var("zeta");
    let mut index = vec![vec![None; n_slots]; k_users];
    for (k, row) in rates.iter().enumerate() {
        for (n, &r) in row.iter().enumerate() {
            if r > 0.0 {
                let v = prog.add_var(format!("a[{k}][{n}]"));
                prog.add_bounds(v, 0.0, 1.0);
                index[k][n] = Some(v);
            }
        }
    }
    prog.objective = AffineExpr::var(zeta);
    let inv_n = 1.0 / n_slots as f64;
    for (k, row) in rates.iter().enumerate() {
        let mut c = AffineExpr { terms: vec![(zeta, -1.0)], constant: 0.0 };
        for (n, &r) in row.iter().enumerate() {
            if let Some(v) = index[k][n] {
                c.add_term(v, inv_n * r / r_max);
            }
        }
        prog.add(Constraint::Affine(c));
    }
    for n in 0..n_slots {
        let mut c = AffineExpr::constant(1.0);
        for row in &index {
            if let Some(v) = row[n] {
                c.add_term(v, -1.0);
            }
        }
        if !c.terms.is_empty() {
            prog.add(Constraint::Affine(c));
        }
    }

    let share = 1.0 / (k_users as f64 + 1.0);
    let mut start = vec![share; prog.num_vars()];
    let worst = rates
        .iter()
        .map(|row| inv_n * row.iter().filter(|&&r| r > 0.0).map(|r| share * r / r_max).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    start[zeta] = worst - 1.0;

    let report = solve(&prog, &start, &SolverOptions { tol: 1e-9, ..SolverOptions::default() });
    if report.status == SolveStatus::NumericalFailure {
        return Err(Error::Solver("association LP failed".into()));
    }
    for (k, row) in index.iter().enumerate() {
        for (n, v) in row.iter().enumerate() {
            if let Some(v) = v {
                assoc[k][n] = report.x[*v].clamp(0.0, 1.0);
            }
        }
    }
    Ok(AssociationLp { assoc, zeta: report.x[zeta].max(0.0) * r_max, status: report.status })
}

/// Per slot, assigns the user with the largest fractional share when that
/// share exceeds 1e−6 (lowest index on ties); otherwise the slot is silent.
pub fn round_association(fractional: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k_users = fractional.len();
    let n_slots = fractional.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; n_slots]; k_users];
    for n in 0..n_slots {
        let mut best: Option<(usize, f64)> = None;
        for (k, row) in fractional.iter().enumerate() {
            if row[n] > 1e-6 && best.is_none_or(|(_, b)| row[n] > b) {
                best = Some((k, row[n]));
            }
        }
        if let Some((k, _)) = best {
            out[k][n] = 1.0;
        }
    }
    out
}
