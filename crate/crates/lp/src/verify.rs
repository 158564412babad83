//! Optimality certificates computed from the original (unscaled) data.

use crate::{LinearProgram, LpSolution, RowSense};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KktReport {
    /// Largest row or bound violation of the primal point.
    pub primal_violation: f64,
    /// Largest sign violation of row duals and reduced costs.
    pub dual_violation: f64,
    /// Largest `|dual| * slack` product over rows and variables.
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl KktReport {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }
}

/// Dual objective `b'y + sum_j (d_j^+ l_j - d_j^- u_j)`; reduced costs whose
/// matching bound is infinite count as dual violations instead.
pub fn kkt(lp: &LinearProgram, sol: &LpSolution) -> KktReport {
    let mut rep = KktReport { primal_objective: sol.objective, ..Default::default() };
    let mut dual_obj = 0.0;
    for (i, row) in lp.rows.iter().enumerate() {
        let act: f64 = row.coeffs.iter().map(|&(j, a)| a * sol.x[j]).sum();
        let y = sol.row_duals[i];
        dual_obj += y * row.rhs;
        let (viol, sign_viol) = match row.sense {
            RowSense::Eq => ((act - row.rhs).abs(), 0.0),
            RowSense::Le => ((act - row.rhs).max(0.0), y.max(0.0)),
            RowSense::Ge => ((row.rhs - act).max(0.0), (-y).max(0.0)),
        };
        rep.primal_violation = rep.primal_violation.max(viol);
        rep.dual_violation = rep.dual_violation.max(sign_viol);
        if row.sense != RowSense::Eq {
            rep.complementarity = rep.complementarity.max((y * (act - row.rhs)).abs());
        }
    }
    for j in 0..lp.num_vars() {
        let (l, u, x, d) = (lp.lower[j], lp.upper[j], sol.x[j], sol.reduced_costs[j]);
        rep.primal_violation = rep.primal_violation.max((l - x).max(x - u).max(0.0));
        if d > 0.0 {
            if l.is_finite() {
                dual_obj += d * l;
                rep.complementarity = rep.complementarity.max(d * (x - l).abs());
            } else {
                rep.dual_violation = rep.dual_violation.max(d);
            }
        } else if d < 0.0 {
            if u.is_finite() {
                dual_obj += d * u;
                rep.complementarity = rep.complementarity.max(-d * (u - x).abs());
            } else {
                rep.dual_violation = rep.dual_violation.max(-d);
            }
        }
    }
    rep.dual_objective = dual_obj;
    rep
}
