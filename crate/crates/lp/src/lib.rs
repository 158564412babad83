//! Exact linear-programming engine with primal and dual solutions.
//!
//! The solver is a bounded-variable revised simplex (Dantzig pricing with a
//! Bland fallback under prolonged degeneracy). Row duals are the sensitivities
//! `d objective / d rhs`, which is what the dispatch layer reads as nodal
//! prices. At degenerate vertices the reported duals are those of the final
//! basis.

mod problem;
mod simplex;
pub mod verify;

pub use problem::{LinearProgram, Row, RowSense};
pub use simplex::{solve, solve_warm, solve_with, Basis, SolverOptions, VarStatus};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("variable x{var} has lower bound {lower} above upper bound {upper}")]
    Bounds { var: usize, lower: f64, upper: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// The iteration broke down (singular basis, iteration limit, or a final
    /// point that fails the residual check). Never reported as optimal.
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: Status,
    /// Primal values; meaningful only when `status` is optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual per row: the marginal objective change per unit of rhs.
    /// Zero for non-binding inequalities.
    pub row_duals: Vec<f64>,
    /// `c_j - sum_i y_i a_ij` for every variable.
    pub reduced_costs: Vec<f64>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn is_basic(&self, var: usize) -> bool {
        self.basis.as_ref().is_some_and(|b| b.statuses[var] == VarStatus::Basic)
    }
}
