//! Bounded-variable revised primal simplex.
//!
//! Every row owns a logical column: a slack for `<=` rows and an artificial
//! for equality rows. Rows whose slack would start negative get an extra
//! artificial. Phase 1 minimises the sum of artificials, phase 2 fixes them
//! at zero and minimises the true objective. Pricing is Dantzig's rule with a
//! switch to Bland's rule after a run of degenerate pivots.

use crate::factor::{ColRef, Factorization};
use crate::problem::LinearProgram;
use crate::solution::{LpSolution, LpStatus};
use crate::LpError;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Absolute primal feasibility tolerance on bounds, scaled by `1 + max|b|`
    /// for the phase 1 infeasibility verdict.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance.
    pub optimality_tol: f64,
    /// Smallest pivot element accepted by the ratio test.
    pub pivot_tol: f64,
    /// Eta updates between refactorisations.
    pub refactor_interval: usize,
    /// Bases with fewer rows than this are factorised densely.
    pub dense_threshold: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// Defaults to `max(10_000, 20 * (rows + columns))`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            pivot_tol: 1e-9,
            refactor_interval: 100,
            dense_threshold: 200,
            degenerate_limit: 50,
            max_iterations: None,
        }
    }
}

/// Solves `lp` with default options.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut s = Simplex::new(lp, opts)?;
    let infeasibility_tol =
        opts.feasibility_tol * (1.0 + s.b.iter().fold(0.0f64, |a, v| a.max(v.abs())));

    let has_artificial_value = s.artificial.iter().zip(&s.x).any(|(&a, &v)| a && v > 0.0);
    if has_artificial_value {
        s.cost = s
            .artificial
            .iter()
            .map(|&a| if a { 1.0 } else { 0.0 })
            .collect();
        s.iterate()?;
        let infeasibility: f64 = (0..s.n_cols)
            .filter(|&j| s.artificial[j])
            .map(|j| s.x[j].max(0.0))
            .sum();
        if infeasibility > infeasibility_tol {
            return Ok(s.finish(lp, LpStatus::Infeasible));
        }
    }
    s.enter_phase_two(lp);
    s.refactor()?;
    let status = if s.iterate()? {
        LpStatus::Optimal
    } else {
        LpStatus::Unbounded
    };
    if status == LpStatus::Optimal {
        let viol = s.max_primal_violation();
        if viol > 1e3 * infeasibility_tol {
            return Err(LpError::NumericalFailure(format!(
                "basic solution violates bounds by {viol:e} after refactorisation"
            )));
        }
    }
    Ok(s.finish(lp, status))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    Free,
    Fixed,
}

struct Simplex<'o> {
    opts: &'o SolverOptions,
    m: usize,
    n_struct: usize,
    n_cols: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    artificial: Vec<bool>,
    /// Per row, the column of its slack or equality artificial.
    logical: Vec<usize>,
    b: Vec<f64>,
    head: Vec<usize>,
    state: Vec<State>,
    x: Vec<f64>,
    factor: Factorization,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

fn nonbasic_state(lo: f64, hi: f64) -> (State, f64) {
    if lo == hi {
        (State::Fixed, lo)
    } else if lo.is_finite() {
        (State::Lower, lo)
    } else if hi.is_finite() {
        (State::Upper, hi)
    } else {
        (State::Free, 0.0)
    }
}

impl<'o> Simplex<'o> {
    fn new(lp: &LinearProgram, opts: &'o SolverOptions) -> Result<Self, LpError> {
        let n = lp.n_vars();
        let n_eq = lp.eq.len();
        let m = n_eq + lp.ub.len();

        // column-compressed copy of the structural part
        let mut counts = vec![0usize; n + 1];
        for block in [&lp.eq, &lp.ub] {
            for &j in &block.cols {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let mut col_start = counts.clone();
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = counts;
        for (offset, block) in [(0usize, &lp.eq), (n_eq, &lp.ub)] {
            for i in 0..block.len() {
                for (j, a) in block.row(i) {
                    col_row[fill[j]] = offset + i;
                    col_val[fill[j]] = a;
                    fill[j] += 1;
                }
            }
        }

        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        let mut cost = lp.cost.clone();
        let mut state = Vec::with_capacity(n + m);
        let mut x = Vec::with_capacity(n + m);
        for j in 0..n {
            let (st, v) = nonbasic_state(lo[j], hi[j]);
            state.push(st);
            x.push(v);
        }
        let b: Vec<f64> = lp.eq.rhs.iter().chain(&lp.ub.rhs).copied().collect();
        let mut resid = b.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for p in col_start[j]..col_start[j + 1] {
                    resid[col_row[p]] -= col_val[p] * x[j];
                }
            }
        }

        let mut artificial = vec![false; n];
        let mut logical = vec![0usize; m];
        let mut head = vec![0usize; m];
        let mut extra: Vec<usize> = Vec::new();
        let push_unit = |row: usize,
                         sign: f64,
                         col_start: &mut Vec<usize>,
                         col_row: &mut Vec<usize>,
                         col_val: &mut Vec<f64>|
         -> usize {
            col_row.push(row);
            col_val.push(sign);
            col_start.push(col_row.len());
            col_start.len() - 2
        };
        for i in 0..m {
            let r = resid[i];
            let j = if i < n_eq {
                let sign = if r < 0.0 { -1.0 } else { 1.0 };
                let j = push_unit(i, sign, &mut col_start, &mut col_row, &mut col_val);
                artificial.push(true);
                state.push(State::Basic);
                x.push(r.abs());
                head[i] = j;
                j
            } else {
                let j = push_unit(i, 1.0, &mut col_start, &mut col_row, &mut col_val);
                artificial.push(false);
                if r >= 0.0 {
                    state.push(State::Basic);
                    x.push(r);
                    head[i] = j;
                } else {
                    state.push(State::Lower);
                    x.push(0.0);
                    extra.push(i);
                }
                j
            };
            logical[i] = j;
            lo.push(0.0);
            hi.push(f64::INFINITY);
            cost.push(0.0);
        }
        for i in extra {
            let j = push_unit(i, -1.0, &mut col_start, &mut col_row, &mut col_val);
            artificial.push(true);
            state.push(State::Basic);
            x.push(-resid[i]);
            head[i] = j;
            lo.push(0.0);
            hi.push(f64::INFINITY);
            cost.push(0.0);
        }
        let n_cols = x.len();

        let dense = m < opts.dense_threshold;
        let refs: Vec<ColRef> = head
            .iter()
            .map(|&j| {
                let r = col_start[j]..col_start[j + 1];
                (&col_row[r.clone()], &col_val[r])
            })
            .collect();
        let factor = Factorization::new(m, &refs, dense)
            .map_err(|_| LpError::NumericalFailure("initial logical basis is singular".into()))?;

        Ok(Simplex {
            opts,
            m,
            n_struct: n,
            n_cols,
            col_start,
            col_row,
            col_val,
            lo,
            hi,
            cost,
            artificial,
            logical,
            b,
            head,
            state,
            x,
            factor,
            iterations: 0,
            max_iterations: opts
                .max_iterations
                .unwrap_or((20 * (m + n_cols)).max(10_000)),
            degenerate_run: 0,
            bland: false,
        })
    }

    fn column(&self, j: usize) -> ColRef<'_> {
        let r = self.col_start[j]..self.col_start[j + 1];
        (&self.col_row[r.clone()], &self.col_val[r])
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        let (rows, vals) = self.column(j);
        rows.iter().zip(vals).map(|(&i, &a)| a * y[i]).sum()
    }

    fn enter_phase_two(&mut self, lp: &LinearProgram) {
        self.cost = lp.cost.clone();
        self.cost.resize(self.n_cols, 0.0);
        for j in 0..self.n_cols {
            if self.artificial[j] {
                self.hi[j] = 0.0;
                if self.state[j] != State::Basic {
                    self.state[j] = State::Fixed;
                    self.x[j] = 0.0;
                }
            }
        }
        self.degenerate_run = 0;
        self.bland = false;
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let dense = self.m < self.opts.dense_threshold;
        for _ in 0..4 {
            let result = {
                let refs: Vec<ColRef> = self.head.iter().map(|&j| self.column(j)).collect();
                Factorization::new(self.m, &refs, dense)
            };
            match result {
                Ok(f) => {
                    self.factor = f;
                    self.recompute_basic_values();
                    return Ok(());
                }
                Err(singular) => {
                    // swap unit columns of unpivoted rows in for the dependent columns
                    let mut rows = singular.free_rows.iter();
                    for &pos in &singular.failed_positions {
                        let replacement = rows
                            .by_ref()
                            .map(|&r| self.logical[r])
                            .find(|&j| self.state[j] != State::Basic)
                            .ok_or_else(|| {
                                LpError::NumericalFailure("cannot repair singular basis".into())
                            })?;
                        let out = self.head[pos];
                        let (st, v) = nonbasic_state(self.lo[out], self.hi[out]);
                        let v = match st {
                            State::Lower | State::Upper
                                if self.lo[out].is_finite() && self.hi[out].is_finite() =>
                            {
                                if (self.x[out] - self.lo[out]).abs()
                                    <= (self.hi[out] - self.x[out]).abs()
                                {
                                    self.state[out] = State::Lower;
                                    self.lo[out]
                                } else {
                                    self.state[out] = State::Upper;
                                    self.hi[out]
                                }
                            }
                            _ => {
                                self.state[out] = st;
                                v
                            }
                        };
                        self.x[out] = v;
                        self.head[pos] = replacement;
                        self.state[replacement] = State::Basic;
                    }
                }
            }
        }
        Err(LpError::NumericalFailure(
            "basis stays singular after repair".into(),
        ))
    }

    fn recompute_basic_values(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.n_cols {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                for p in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[p]] -= self.col_val[p] * self.x[j];
                }
            }
        }
        let xb = self.factor.ftran(&rhs);
        for (pos, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[pos];
        }
    }

    fn max_primal_violation(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| {
                (self.lo[j] - self.x[j])
                    .max(self.x[j] - self.hi[j])
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.factor.btran(&cb)
    }

    /// Runs simplex iterations on the current cost vector. Returns `true` at
    /// an optimum and `false` when an unbounded ray is found.
    fn iterate(&mut self) -> Result<bool, LpError> {
        let opt_tol = self.opts.optimality_tol;
        let feas_tol = self.opts.feasibility_tol;
        let piv_tol = self.opts.pivot_tol;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.factor.n_etas() >= self.opts.refactor_interval || self.factor.eta_heavy() {
                self.refactor()?;
            }
            let y = self.duals();

            // pricing
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.n_cols {
                let st = self.state[j];
                if matches!(st, State::Basic | State::Fixed) {
                    continue;
                }
                let d = self.cost[j] - self.dot_column(j, &y);
                let dir = match st {
                    State::Lower if d < -opt_tol => 1.0,
                    State::Upper if d > opt_tol => -1.0,
                    State::Free if d.abs() > opt_tol => -d.signum(),
                    _ => continue,
                };
                if self.bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                if self.factor.n_etas() > 0 {
                    // confirm optimality on a fresh factorisation
                    self.refactor()?;
                    if self.duals_confirm_optimal() {
                        return Ok(true);
                    }
                    continue;
                }
                return Ok(true);
            };

            let mut aq = vec![0.0; self.m];
            {
                let (rows, vals) = self.column(q);
                for (&i, &a) in rows.iter().zip(vals) {
                    aq[i] = a;
                }
            }
            let alpha = self.factor.ftran(&aq);

            // ratio test; basic variable i moves at rate -dir * alpha[i]
            let ratio = |pos: usize, relax: f64| -> f64 {
                let j = self.head[pos];
                let delta = -dir * alpha[pos];
                if delta < 0.0 {
                    if self.lo[j].is_finite() {
                        (self.x[j] - self.lo[j] + relax).max(0.0) / -delta
                    } else {
                        f64::INFINITY
                    }
                } else if self.hi[j].is_finite() {
                    (self.hi[j] + relax - self.x[j]).max(0.0) / delta
                } else {
                    f64::INFINITY
                }
            };
            let mut leave: Option<usize> = None;
            if self.bland {
                let mut t_min = f64::INFINITY;
                for pos in 0..self.m {
                    if alpha[pos].abs() > piv_tol {
                        t_min = t_min.min(ratio(pos, 0.0));
                    }
                }
                if t_min.is_finite() {
                    let tie = t_min + 1e-12 * (1.0 + t_min);
                    for pos in 0..self.m {
                        if alpha[pos].abs() > piv_tol
                            && ratio(pos, 0.0) <= tie
                            && leave.is_none_or(|l| self.head[pos] < self.head[l])
                        {
                            leave = Some(pos);
                        }
                    }
                }
            } else {
                let mut t_max = f64::INFINITY;
                for pos in 0..self.m {
                    if alpha[pos].abs() > piv_tol {
                        t_max = t_max.min(ratio(pos, feas_tol));
                    }
                }
                if t_max.is_finite() {
                    let mut best_alpha = 0.0;
                    for pos in 0..self.m {
                        let a = alpha[pos].abs();
                        if a > piv_tol && ratio(pos, 0.0) <= t_max {
                            let better = match leave {
                                None => true,
                                Some(l) => {
                                    a > best_alpha
                                        || (a == best_alpha && self.head[pos] < self.head[l])
                                }
                            };
                            if better {
                                best_alpha = a;
                                leave = Some(pos);
                            }
                        }
                    }
                }
            }
            let flip = self.hi[q] - self.lo[q];
            let t_leave = leave.map_or(f64::INFINITY, |pos| ratio(pos, 0.0));
            let (t, is_flip) = if flip <= t_leave {
                (flip, true)
            } else {
                (t_leave, false)
            };
            if !t.is_finite() {
                return Ok(false);
            }

            self.iterations += 1;
            if t <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > self.opts.degenerate_limit {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }

            if t > 0.0 {
                for pos in 0..self.m {
                    if alpha[pos] != 0.0 {
                        let j = self.head[pos];
                        self.x[j] -= dir * t * alpha[pos];
                    }
                }
            }
            if is_flip {
                if dir > 0.0 {
                    self.state[q] = State::Upper;
                    self.x[q] = self.hi[q];
                } else {
                    self.state[q] = State::Lower;
                    self.x[q] = self.lo[q];
                }
                continue;
            }
            let r = leave.expect("finite step without a leaving row");
            let out = self.head[r];
            if -dir * alpha[r] < 0.0 {
                self.state[out] = if self.lo[out] == self.hi[out] {
                    State::Fixed
                } else {
                    State::Lower
                };
                self.x[out] = self.lo[out];
            } else {
                self.state[out] = if self.lo[out] == self.hi[out] {
                    State::Fixed
                } else {
                    State::Upper
                };
                self.x[out] = self.hi[out];
            }
            self.x[q] += dir * t;
            self.state[q] = State::Basic;
            self.head[r] = q;
            self.factor.update(r, &alpha);
        }
    }

    fn duals_confirm_optimal(&self) -> bool {
        let y = self.duals();
        let tol = self.opts.optimality_tol;
        (0..self.n_cols).all(|j| {
            let d = self.cost[j] - self.dot_column(j, &y);
            match self.state[j] {
                State::Basic | State::Fixed => true,
                State::Lower => d >= -tol,
                State::Upper => d <= tol,
                State::Free => d.abs() <= tol,
            }
        })
    }

    fn finish(&self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let n = self.n_struct;
        let y = self.duals();
        let n_eq = lp.eq.len();
        let x: Vec<f64> = self.x[..n].to_vec();
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| lp.cost[j] - self.dot_column(j, &y))
            .collect();
        let ftol = self.opts.feasibility_tol;
        let degenerate = self.head.iter().any(|&j| {
            (self.lo[j].is_finite() && (self.x[j] - self.lo[j]).abs() <= ftol)
                || (self.hi[j].is_finite() && (self.hi[j] - self.x[j]).abs() <= ftol)
        });
        let dual_degenerate = (0..self.n_cols).any(|j| {
            matches!(self.state[j], State::Lower | State::Upper | State::Free)
                && (self.cost[j] - self.dot_column(j, &y)).abs() <= self.opts.optimality_tol
        });
        LpSolution {
            status,
            objective: lp.objective_at(&x),
            x,
            duals_eq: y[..n_eq].to_vec(),
            duals_ub: y[n_eq..].to_vec(),
            reduced_costs,
            degenerate,
            dual_degenerate,
            iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{sensitivity, VarId};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * (1.0 + b.abs())
    }

    #[test]
    fn scalar_equality() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg_var(1.0);
        let r = lp.add_eq(&[(x, 1.0)], 5.0, "fix");
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(close(sol.value(x), 5.0));
        assert!(close(sol.objective, 5.0));
        assert!(close(sol.dual(r), 1.0));
    }

    fn balance_lp(demand: f64) -> LinearProgram {
        let mut lp = LinearProgram::new();
        let g = lp.add_nonneg_var(50.0);
        let s = lp.add_nonneg_var(3000.0);
        lp.add_eq(&[(g, 1.0), (s, 1.0)], demand, "balance");
        lp.add_le(&[(g, 1.0)], 100.0, "capacity");
        lp
    }

    #[test]
    fn balance_dual_is_marginal_cost() {
        let lp = balance_lp(60.0);
        let sol = solve(&lp).unwrap();
        assert!(close(sol.x[0], 60.0) && close(sol.x[1], 0.0));
        assert!(close(sensitivity(&lp, &sol, "balance").unwrap(), 50.0));
        assert!(close(sensitivity(&lp, &sol, "capacity").unwrap(), 0.0));

        let lp = balance_lp(150.0);
        let sol = solve(&lp).unwrap();
        assert!(close(sol.x[0], 100.0) && close(sol.x[1], 50.0));
        assert!(close(sensitivity(&lp, &sol, "balance").unwrap(), 3000.0));
        assert!(close(sensitivity(&lp, &sol, "capacity").unwrap(), -2950.0));
        assert!(matches!(
            sensitivity(&lp, &sol, "nope"),
            Err(LpError::UnknownLabel(_))
        ));
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_eq(&[(x, 1.0)], 2.0, "r");
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg_var(-1.0);
        let y = lp.add_nonneg_var(0.0);
        lp.add_le(&[(x, 1.0), (y, -1.0)], 1.0, "r");
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_upper_bounded_variables() {
        // min -x - 2y + z, x in [0, 3], y free with y <= 4 - x, z >= y - 10
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, 3.0);
        let y = lp.add_var(-2.0, f64::NEG_INFINITY, f64::INFINITY);
        let z = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_le(&[(x, 1.0), (y, 1.0)], 4.0, "xy");
        lp.add_ge(&[(z, 1.0), (y, -1.0)], -10.0, "zy");
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // z = y - 10, objective -x - y - 10 with x + y <= 4
        assert!(close(sol.objective, -14.0), "{}", sol.objective);
        assert!(close(sol.x[z.0] - sol.x[y.0], -10.0));
        assert!(sol.dual_degenerate);
    }

    #[test]
    fn ge_row_dual_sign() {
        // min 2x s.t. x >= 3: relaxing the stored row -x <= -3 by +1 lowers cost by 2
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg_var(2.0);
        let r = lp.add_ge(&[(x, 1.0)], 3.0, "floor");
        let sol = solve(&lp).unwrap();
        assert!(close(sol.value(x), 3.0));
        assert!(close(sol.dual(r), -2.0));
    }

    #[test]
    fn redundant_equalities_do_not_break_the_solver() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg_var(1.0);
        let y = lp.add_nonneg_var(2.0);
        lp.add_eq(&[(x, 1.0), (y, 1.0)], 4.0, "a");
        lp.add_eq(&[(x, 2.0), (y, 2.0)], 8.0, "b");
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(close(sol.objective, 4.0));
        assert!(close(sol.value(x), 4.0));
        let _ = VarId(0);
    }

    #[test]
    fn sparse_path_matches_dense_path() {
        let opts_sparse = SolverOptions {
            dense_threshold: 0,
            ..Default::default()
        };
        let lp = balance_lp(150.0);
        let a = solve(&lp).unwrap();
        let b = solve_with(&lp, &opts_sparse).unwrap();
        assert!(close(a.objective, b.objective));
        assert!(close(a.duals_eq[0], b.duals_eq[0]));
    }
}
