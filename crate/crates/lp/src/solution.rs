use crate::problem::{LinearProgram, RowId, RowKind};
use crate::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a solve.
///
/// Duals follow the convention `dual = d(objective)/d(rhs)`, so under
/// minimisation the dual of an active `<=` row is non-positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values of the structural variables.
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals_eq: Vec<f64>,
    pub duals_ub: Vec<f64>,
    /// Reduced costs `c_j - y.A_j` of the structural variables.
    pub reduced_costs: Vec<f64>,
    /// Some basic variable sits at one of its bounds: the duals may not be unique.
    pub degenerate: bool,
    /// Some non-fixed nonbasic variable has zero reduced cost: the primal may not be unique.
    pub dual_degenerate: bool,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn dual(&self, row: RowId) -> f64 {
        match row.kind {
            RowKind::Eq => self.duals_eq[row.index],
            RowKind::Le => self.duals_ub[row.index],
        }
    }

    pub fn value(&self, var: crate::VarId) -> f64 {
        self.x[var.0]
    }

    /// Objective of the dual problem at the reported duals: `b.y` plus the
    /// bound contributions `d_j * x_j` of the structural variables.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let by: f64 = (0..lp.eq.len())
            .map(|i| lp.eq.rhs[i] * self.duals_eq[i])
            .chain((0..lp.ub.len()).map(|i| lp.ub.rhs[i] * self.duals_ub[i]))
            .sum();
        let bounds: f64 = self
            .reduced_costs
            .iter()
            .zip(&self.x)
            .map(|(d, x)| d * x)
            .sum();
        by + bounds
    }
}

/// Dual value of the row with the given label.
pub fn sensitivity(lp: &LinearProgram, sol: &LpSolution, label: &str) -> Result<f64, LpError> {
    if !sol.is_optimal() {
        return Err(LpError::NotOptimal(sol.status));
    }
    let row = lp
        .find_row(label)
        .ok_or_else(|| LpError::UnknownLabel(label.to_string()))?;
    Ok(sol.dual(row))
}
