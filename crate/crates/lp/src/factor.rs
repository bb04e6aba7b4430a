//! Basis factorisation: LU of the basis matrix plus a product-form eta file.
//!
//! The basis `B` is an `m x m` matrix whose column `j` is the constraint
//! column of the variable at basis position `j`. `ftran` solves `B x = a`
//! (input indexed by row, output by basis position) and `btran` solves
//! `B^T y = c` (input by basis position, output by row).

/// Pivots smaller than this are treated as zero during factorisation.
const PIVOT_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

/// A sparse column given as parallel row-index / value slices.
pub(crate) type ColRef<'a> = (&'a [usize], &'a [f64]);

/// Basis columns that could not be pivoted, and the rows left without a pivot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub failed_positions: Vec<usize>,
    pub free_rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) enum Lu {
    Dense(DenseLu),
    Sparse(SparseLu),
}

impl Lu {
    pub fn factorize(m: usize, cols: &[ColRef<'_>], dense: bool) -> Result<Lu, Singular> {
        if dense {
            DenseLu::factorize(m, cols).map(Lu::Dense)
        } else {
            SparseLu::factorize(m, cols).map(Lu::Sparse)
        }
    }

    fn ftran(&self, rhs: &[f64], out: &mut [f64]) {
        match self {
            Lu::Dense(lu) => lu.ftran(rhs, out),
            Lu::Sparse(lu) => lu.ftran(rhs, out),
        }
    }

    fn btran(&self, rhs: &[f64], out: &mut [f64]) {
        match self {
            Lu::Dense(lu) => lu.btran(rhs, out),
            Lu::Sparse(lu) => lu.btran(rhs, out),
        }
    }

    fn fill(&self) -> usize {
        match self {
            Lu::Dense(lu) => lu.m * lu.m,
            Lu::Sparse(lu) => lu.l_idx.len() + lu.u_idx.len() + lu.m,
        }
    }
}

/// Elementary column transformation recorded after a basis change.
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// LU factors of a reference basis and the etas of subsequent pivots.
#[derive(Debug, Clone)]
pub(crate) struct Factorization {
    lu: Lu,
    etas: Vec<Eta>,
    eta_nnz: usize,
    m: usize,
}

impl Factorization {
    pub fn new(m: usize, cols: &[ColRef<'_>], dense: bool) -> Result<Self, Singular> {
        Ok(Factorization {
            lu: Lu::factorize(m, cols, dense)?,
            etas: Vec::new(),
            eta_nnz: 0,
            m,
        })
    }

    pub fn n_etas(&self) -> usize {
        self.etas.len()
    }

    /// True when the eta file has grown past the size of the LU factors.
    pub fn eta_heavy(&self) -> bool {
        self.eta_nnz > 2 * self.lu.fill() + 4 * self.m
    }

    /// Solves `B x = a`. `a` is indexed by row; the result by basis position.
    pub fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        self.lu.ftran(a, &mut x);
        for eta in &self.etas {
            let xr = x[eta.pos];
            if xr != 0.0 {
                let xr = xr / eta.pivot;
                x[eta.pos] = xr;
                for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                    x[i] -= a * xr;
                }
            }
        }
        x
    }

    /// Solves `B^T y = c`. `c` is indexed by basis position; the result by row.
    pub fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut w = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = w[eta.pos];
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                s -= a * w[i];
            }
            w[eta.pos] = s / eta.pivot;
        }
        let mut y = vec![0.0; self.m];
        self.lu.btran(&w, &mut y);
        y
    }

    /// Records the replacement of the column at basis position `pos` by a column
    /// whose ftran image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > DROP_TOL {
                idx.push(i);
                val.push(a);
            }
        }
        self.eta_nnz += idx.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            idx,
            val,
        });
    }
}

/// Dense LU with partial pivoting, used for small problems.
#[derive(Debug, Clone)]
pub(crate) struct DenseLu {
    m: usize,
    /// Row-major compact factors.
    a: Vec<f64>,
    /// Per elimination step: (basis position, pivot row).
    steps: Vec<(usize, usize)>,
}

impl DenseLu {
    fn factorize(m: usize, cols: &[ColRef<'_>]) -> Result<Self, Singular> {
        let mut a = vec![0.0; m * m];
        for (j, (idx, val)) in cols.iter().enumerate() {
            for (&i, &v) in idx.iter().zip(val.iter()) {
                a[i * m + j] += v;
            }
        }
        let mut row_done = vec![false; m];
        let mut steps = Vec::with_capacity(m);
        let mut failed = Vec::new();
        for j in 0..m {
            let mut best = 0.0;
            let mut p = usize::MAX;
            for i in 0..m {
                if !row_done[i] && a[i * m + j].abs() > best {
                    best = a[i * m + j].abs();
                    p = i;
                }
            }
            if best < PIVOT_TOL {
                failed.push(j);
                continue;
            }
            row_done[p] = true;
            steps.push((j, p));
            let piv = a[p * m + j];
            for i in 0..m {
                if row_done[i] {
                    continue;
                }
                let l = a[i * m + j] / piv;
                a[i * m + j] = l;
                if l != 0.0 {
                    for jj in (j + 1)..m {
                        a[i * m + jj] -= l * a[p * m + jj];
                    }
                }
            }
        }
        if !failed.is_empty() {
            let free_rows = (0..m).filter(|&i| !row_done[i]).collect();
            return Err(Singular {
                failed_positions: failed,
                free_rows,
            });
        }
        Ok(DenseLu { m, a, steps })
    }

    fn ftran(&self, rhs: &[f64], out: &mut [f64]) {
        let m = self.m;
        let n = self.steps.len();
        let mut w = vec![0.0; n];
        for k in 0..n {
            let p = self.steps[k].1;
            let mut s = rhs[p];
            for kk in 0..k {
                s -= self.a[p * m + self.steps[kk].0] * w[kk];
            }
            w[k] = s;
        }
        let mut z = vec![0.0; n];
        for k in (0..n).rev() {
            let (j, p) = self.steps[k];
            let mut s = w[k];
            for l in (k + 1)..n {
                s -= self.a[p * m + self.steps[l].0] * z[l];
            }
            z[k] = s / self.a[p * m + j];
            out[j] = z[k];
        }
    }

    fn btran(&self, rhs: &[f64], out: &mut [f64]) {
        let m = self.m;
        let n = self.steps.len();
        let mut v = vec![0.0; n];
        for k in 0..n {
            let (j, p) = self.steps[k];
            let mut s = rhs[j];
            for kk in 0..k {
                s -= self.a[self.steps[kk].1 * m + j] * v[kk];
            }
            v[k] = s / self.a[p * m + j];
        }
        for k in (0..n).rev() {
            let (j, p) = self.steps[k];
            let mut s = v[k];
            for kk in (k + 1)..n {
                let pk = self.steps[kk].1;
                s -= self.a[pk * m + j] * out[pk];
            }
            out[p] = s;
        }
    }
}

/// Left-looking sparse LU (Gilbert-Peierls) with partial pivoting.
///
/// Columns are eliminated in order of increasing fill, so slack and
/// artificial columns pivot first on their own rows.
#[derive(Debug, Clone)]
pub(crate) struct SparseLu {
    m: usize,
    pivot_row: Vec<usize>,
    col_of_step: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
}

impl SparseLu {
    fn factorize(m: usize, cols: &[ColRef<'_>]) -> Result<Self, Singular> {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&j| (cols[j].0.len(), j));

        let mut lu = SparseLu {
            m,
            pivot_row: Vec::with_capacity(m),
            col_of_step: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
        };
        let mut row_step = vec![usize::MAX; m];
        let mut work = vec![0.0; m];
        let mut in_pattern = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut visited = vec![false; m];
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut failed = Vec::new();

        for &j in &order {
            let (idx, val) = cols[j];
            pattern.clear();
            topo.clear();
            for (&r, &v) in idx.iter().zip(val.iter()) {
                work[r] += v;
                if !in_pattern[r] {
                    in_pattern[r] = true;
                    pattern.push(r);
                }
            }
            // symbolic: steps reachable from the column's pivoted rows, in postorder
            for &r in idx {
                let k0 = row_step[r];
                if k0 == usize::MAX || visited[k0] {
                    continue;
                }
                visited[k0] = true;
                stack.push((k0, lu.l_start[k0]));
                while let Some(&mut (k, ref mut next)) = stack.last_mut() {
                    let end = lu.l_start[k + 1];
                    let mut pushed = false;
                    while *next < end {
                        let rr = lu.l_idx[*next];
                        *next += 1;
                        let kk = row_step[rr];
                        if kk != usize::MAX && !visited[kk] {
                            visited[kk] = true;
                            stack.push((kk, lu.l_start[kk]));
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        topo.push(k);
                        stack.pop();
                    }
                }
            }
            // numeric: apply previous L columns in topological order
            let mut u_entries: Vec<(usize, f64)> = Vec::with_capacity(topo.len());
            for &k in topo.iter().rev() {
                visited[k] = false;
                let pr = lu.pivot_row[k];
                let xk = work[pr];
                work[pr] = 0.0;
                if xk.abs() <= DROP_TOL {
                    continue;
                }
                u_entries.push((k, xk));
                for p in lu.l_start[k]..lu.l_start[k + 1] {
                    let rr = lu.l_idx[p];
                    if !in_pattern[rr] {
                        in_pattern[rr] = true;
                        pattern.push(rr);
                    }
                    work[rr] -= lu.l_val[p] * xk;
                }
            }
            // choose pivot among unpivoted rows
            let mut max_abs = 0.0f64;
            for &r in &pattern {
                if row_step[r] == usize::MAX {
                    max_abs = max_abs.max(work[r].abs());
                }
            }
            // largest entry wins; ties go to the lowest row index
            let mut piv_row = usize::MAX;
            if max_abs >= PIVOT_TOL {
                let mut best = 0.0;
                for &r in &pattern {
                    let v = work[r].abs();
                    if row_step[r] == usize::MAX && (v > best || (v == best && r < piv_row)) {
                        best = v;
                        piv_row = r;
                    }
                }
            }
            if piv_row == usize::MAX {
                failed.push(j);
                for &r in &pattern {
                    work[r] = 0.0;
                    in_pattern[r] = false;
                }
                continue;
            }
            let piv = work[piv_row];
            let step = lu.pivot_row.len();
            for (k, v) in u_entries {
                lu.u_idx.push(k);
                lu.u_val.push(v);
            }
            lu.u_start.push(lu.u_idx.len());
            lu.u_diag.push(piv);
            let mut sorted: Vec<usize> = pattern
                .iter()
                .copied()
                .filter(|&r| row_step[r] == usize::MAX && r != piv_row)
                .collect();
            sorted.sort_unstable();
            for r in sorted {
                let v = work[r];
                if v.abs() > DROP_TOL {
                    lu.l_idx.push(r);
                    lu.l_val.push(v / piv);
                }
            }
            lu.l_start.push(lu.l_idx.len());
            lu.pivot_row.push(piv_row);
            lu.col_of_step.push(j);
            row_step[piv_row] = step;
            for &r in &pattern {
                work[r] = 0.0;
                in_pattern[r] = false;
            }
        }
        if !failed.is_empty() {
            let free_rows = (0..m).filter(|&r| row_step[r] == usize::MAX).collect();
            return Err(Singular {
                failed_positions: failed,
                free_rows,
            });
        }
        Ok(lu)
    }

    fn ftran(&self, rhs: &[f64], out: &mut [f64]) {
        let mut a = rhs.to_vec();
        let mut w = vec![0.0; self.m];
        for k in 0..self.m {
            let wk = a[self.pivot_row[k]];
            w[k] = wk;
            if wk != 0.0 {
                for p in self.l_start[k]..self.l_start[k + 1] {
                    a[self.l_idx[p]] -= self.l_val[p] * wk;
                }
            }
        }
        for k in (0..self.m).rev() {
            let zk = w[k] / self.u_diag[k];
            out[self.col_of_step[k]] = zk;
            if zk != 0.0 {
                for p in self.u_start[k]..self.u_start[k + 1] {
                    w[self.u_idx[p]] -= self.u_val[p] * zk;
                }
            }
        }
    }

    fn btran(&self, rhs: &[f64], out: &mut [f64]) {
        let mut v = vec![0.0; self.m];
        for k in 0..self.m {
            let mut s = rhs[self.col_of_step[k]];
            for p in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[p] * v[self.u_idx[p]];
            }
            v[k] = s / self.u_diag[k];
        }
        for k in (0..self.m).rev() {
            let mut s = v[k];
            for p in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[p] * out[self.l_idx[p]];
            }
            out[self.pivot_row[k]] = s;
        }
    }
}
