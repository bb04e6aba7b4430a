//! Sparse linear programming with constraint duals.
//!
//! [`solve`] runs a bounded-variable revised simplex method and reports the
//! primal vertex together with one dual value per row, using the convention
//! `dual = d(objective)/d(rhs)`.
//!
//! ```
//! use epf_lp::{LinearProgram, solve};
//!
//! let mut lp = LinearProgram::new();
//! let g = lp.add_nonneg_var(50.0);
//! let s = lp.add_nonneg_var(3000.0);
//! let balance = lp.add_eq(&[(g, 1.0), (s, 1.0)], 150.0, "balance");
//! lp.add_le(&[(g, 1.0)], 100.0, "capacity");
//! let sol = solve(&lp).unwrap();
//! assert!((sol.dual(balance) - 3000.0).abs() < 1e-9);
//! ```

mod factor;
pub mod lp_format;
mod problem;
mod simplex;
mod solution;

pub use problem::{LinearProgram, RowBlock, RowId, RowKind, VarId};
pub use simplex::{solve, solve_with, SolverOptions};
pub use solution::{sensitivity, LpSolution, LpStatus};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable {var} has invalid bounds [{lo}, {hi}]")]
    InvalidBounds { var: usize, lo: f64, hi: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("row {row} references variable {var} which does not exist")]
    BadIndex { row: String, var: usize },
    #[error("no row labelled {0:?}")]
    UnknownLabel(String),
    #[error("solution is not optimal (status {0:?})")]
    NotOptimal(LpStatus),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}
