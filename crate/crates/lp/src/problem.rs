//! Linear program container.
//!
//! Problems are always minimisation problems of the form
//!
//! ```text
//! min  c.x
//! s.t. a_i.x  = b_i   (equality rows)
//!      a_i.x <= b_i   (upper-bound rows)
//!      lo <= x <= hi
//! ```
//!
//! Rows are stored in compressed sparse row form and carry an opaque label
//! used to look up their dual value after a solve.

use crate::LpError;

/// Index of a variable in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Sense of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// `a.x = b`
    Eq,
    /// `a.x <= b`
    Le,
}

/// Handle of a constraint row: its kind and its position among rows of that kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RowId {
    pub kind: RowKind,
    pub index: usize,
}

/// Rows of one kind in compressed sparse row storage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowBlock {
    pub(crate) starts: Vec<usize>,
    pub(crate) cols: Vec<usize>,
    pub(crate) vals: Vec<f64>,
    pub(crate) rhs: Vec<f64>,
    pub(crate) labels: Vec<String>,
}

impl RowBlock {
    fn new() -> Self {
        RowBlock {
            starts: vec![0],
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    /// Sparse entries `(column, coefficient)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.starts[i]..self.starts[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    fn push(&mut self, coeffs: &[(VarId, f64)], rhs: f64, label: String) {
        // merge duplicate columns so the stored row is canonical
        let mut entries: Vec<(usize, f64)> = coeffs.iter().map(|(v, a)| (v.0, *a)).collect();
        entries.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for (col, val) in entries {
            if last == Some(col) {
                *self.vals.last_mut().unwrap() += val;
            } else {
                self.cols.push(col);
                self.vals.push(val);
                last = Some(col);
            }
        }
        self.starts.push(self.cols.len());
        self.rhs.push(rhs);
        self.labels.push(label);
    }
}

/// A sparse linear program in minimisation form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub(crate) cost: Vec<f64>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) names: Vec<String>,
    pub(crate) eq: RowBlock,
    pub(crate) ub: RowBlock,
}

impl Default for LinearProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        LinearProgram {
            cost: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            names: Vec::new(),
            eq: RowBlock::new(),
            ub: RowBlock::new(),
        }
    }

    /// Adds a variable with objective coefficient `cost` and bounds `[lo, hi]`.
    ///
    /// Either bound may be infinite.
    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> VarId {
        self.add_named_var(String::new(), cost, lo, hi)
    }

    /// Adds a variable with the default bounds `[0, +inf)`.
    pub fn add_nonneg_var(&mut self, cost: f64) -> VarId {
        self.add_var(cost, 0.0, f64::INFINITY)
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, cost: f64, lo: f64, hi: f64) -> VarId {
        self.cost.push(cost);
        self.lower.push(lo);
        self.upper.push(hi);
        self.names.push(name.into());
        VarId(self.cost.len() - 1)
    }

    pub fn add_eq(&mut self, coeffs: &[(VarId, f64)], rhs: f64, label: impl Into<String>) -> RowId {
        self.eq.push(coeffs, rhs, label.into());
        RowId {
            kind: RowKind::Eq,
            index: self.eq.len() - 1,
        }
    }

    pub fn add_le(&mut self, coeffs: &[(VarId, f64)], rhs: f64, label: impl Into<String>) -> RowId {
        self.ub.push(coeffs, rhs, label.into());
        RowId {
            kind: RowKind::Le,
            index: self.ub.len() - 1,
        }
    }

    /// Adds `a.x >= b` as the upper-bound row `-a.x <= -b`.
    pub fn add_ge(&mut self, coeffs: &[(VarId, f64)], rhs: f64, label: impl Into<String>) -> RowId {
        let negated: Vec<(VarId, f64)> = coeffs.iter().map(|(v, a)| (*v, -a)).collect();
        self.add_le(&negated, -rhs, label)
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.cost[var.0] = cost;
    }

    pub fn set_bounds(&mut self, var: VarId, lo: f64, hi: f64) {
        self.lower[var.0] = lo;
        self.upper[var.0] = hi;
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        match row.kind {
            RowKind::Eq => self.eq.rhs[row.index] = rhs,
            RowKind::Le => self.ub.rhs[row.index] = rhs,
        }
    }

    pub fn rhs(&self, row: RowId) -> f64 {
        self.rows(row.kind).rhs(row.index)
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.eq.len() + self.ub.len()
    }

    pub fn eq_rows(&self) -> &RowBlock {
        &self.eq
    }

    pub fn ub_rows(&self) -> &RowBlock {
        &self.ub
    }

    pub fn rows(&self, kind: RowKind) -> &RowBlock {
        match kind {
            RowKind::Eq => &self.eq,
            RowKind::Le => &self.ub,
        }
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn bounds(&self, var: VarId) -> (f64, f64) {
        (self.lower[var.0], self.upper[var.0])
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.names[var.0]
    }

    /// Finds a row by label. Linear scan; use [`crate::LpSolution::dual`] for repeated lookups.
    pub fn find_row(&self, label: &str) -> Option<RowId> {
        if let Some(i) = self.eq.labels.iter().position(|l| l == label) {
            return Some(RowId {
                kind: RowKind::Eq,
                index: i,
            });
        }
        self.ub
            .labels
            .iter()
            .position(|l| l == label)
            .map(|i| RowId {
                kind: RowKind::Le,
                index: i,
            })
    }

    /// Objective value `c.x`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Row activity `a_i.x`.
    pub fn activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows(row.kind)
            .row(row.index)
            .map(|(j, a)| a * x[j])
            .sum()
    }

    /// Checks index validity, bound ordering and finiteness of all data.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan()
                || hi.is_nan()
                || lo > hi
                || lo == f64::INFINITY
                || hi == f64::NEG_INFINITY
            {
                return Err(LpError::InvalidBounds { var: j, lo, hi });
            }
            if !self.cost[j].is_finite() {
                return Err(LpError::NonFinite(format!("cost of variable {j}")));
            }
        }
        for (block, kind) in [(&self.eq, "eq"), (&self.ub, "ub")] {
            for i in 0..block.len() {
                if !block.rhs[i].is_finite() {
                    return Err(LpError::NonFinite(format!(
                        "rhs of {kind} row {}",
                        block.labels[i]
                    )));
                }
                for (j, a) in block.row(i) {
                    if j >= n {
                        return Err(LpError::BadIndex {
                            row: block.labels[i].clone(),
                            var: j,
                        });
                    }
                    if !a.is_finite() {
                        return Err(LpError::NonFinite(format!(
                            "coefficient in {kind} row {}",
                            block.labels[i]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
