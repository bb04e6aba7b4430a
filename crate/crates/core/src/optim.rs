//! Least-squares building blocks: Levenberg-Marquardt for conditional sums of
//! squares and ordinary least squares with dependent-column dropping.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("{n} observations cannot identify {k} coefficients")]
    TooFewObservations { n: usize, k: usize },
    #[error("design has {rows} rows but the response has {len}")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("least-squares system could not be solved")]
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-10,
            xtol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after each accepted step, starting with the initial cost.
    pub history: Vec<f64>,
}

/// Minimises the sum of squares of `residuals` starting from `x0`.
///
/// `residuals(x, out)` fills `out` (length `n_res`) and returns `false` when
/// `x` is outside the admissible region; such points are never accepted.
/// Only cost-decreasing steps are taken, so `history` is non-increasing.
pub fn levenberg_marquardt<F>(
    mut residuals: F,
    x0: &[f64],
    n_res: usize,
    opts: &LmOptions,
) -> LmResult
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n_res];
    let sumsq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    if !residuals(&x, &mut r) {
        return LmResult {
            x,
            cost: f64::INFINITY,
            iterations: 0,
            converged: false,
            history: vec![],
        };
    }
    let mut cost = sumsq(&r);
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut jac = vec![vec![0.0; n_res]; p];
    let mut trial = vec![0.0; n_res];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations && !converged {
        iterations += 1;
        // forward differences, falling back to backward ones at the boundary
        for k in 0..p {
            let h = 1.5e-8 * x[k].abs().max(1.0);
            let mut xk = x.clone();
            xk[k] += h;
            let (ok, step) = if residuals(&xk, &mut trial) {
                (true, h)
            } else {
                xk[k] = x[k] - h;
                (residuals(&xk, &mut trial), -h)
            };
            let col = &mut jac[k];
            if ok {
                for i in 0..n_res {
                    col[i] = (trial[i] - r[i]) / step;
                }
            } else {
                col.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut g = DVector::<f64>::zeros(p);
        for i in 0..p {
            g[i] = jac[i].iter().zip(&r).map(|(a, b)| a * b).sum();
            for j in 0..=i {
                let v: f64 = jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        if g.amax() <= 1e-14 * (1.0 + cost) {
            converged = true;
            break;
        }
        loop {
            let mut damped = a.clone();
            for i in 0..p {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-12);
            }
            let step = damped.cholesky().map(|c| c.solve(&(-&g)));
            let accepted = step.and_then(|delta| {
                let xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
                if !residuals(&xn, &mut trial) {
                    return None;
                }
                let c = sumsq(&trial);
                (c < cost).then_some((xn, c, delta.norm()))
            });
            match accepted {
                Some((xn, c, step_norm)) => {
                    let rel_drop = (cost - c) / cost.max(f64::MIN_POSITIVE);
                    let xnorm = xn.iter().map(|v| v * v).sum::<f64>().sqrt();
                    x = xn;
                    cost = c;
                    std::mem::swap(&mut r, &mut trial);
                    history.push(cost);
                    lambda = (lambda / 10.0).max(1e-12);
                    if rel_drop <= opts.ftol || step_norm <= opts.xtol * (xnorm + opts.xtol) {
                        converged = true;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        // no descent direction left at this precision
                        converged = true;
                        break;
                    }
                }
            }
        }
    }
    LmResult {
        x,
        cost,
        iterations,
        converged,
        history,
    }
}

/// Greedy selection of linearly independent columns, in column order.
///
/// A column is kept when the part orthogonal to the kept columns retains
/// more than `rel_tol` of its norm. All-zero columns are dropped.
pub fn independent_columns(x: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm0 = col.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = col;
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > rel_tol * norm0 {
            basis.push(v / norm);
            keep.push(j);
        }
    }
    keep
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// One coefficient per design column; dropped columns get 0.
    pub beta: Vec<f64>,
    pub dropped: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Mean squared residual.
    pub sigma2: f64,
}

/// Least squares via QR on the independent columns of `x`.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit, OptimError> {
    let (n, k) = x.shape();
    if n != y.len() {
        return Err(OptimError::DimensionMismatch {
            rows: n,
            len: y.len(),
        });
    }
    let keep = independent_columns(x, 1e-9);
    if n < keep.len().max(1) {
        return Err(OptimError::TooFewObservations { n, k: keep.len() });
    }
    let dropped: Vec<usize> = (0..k).filter(|j| !keep.contains(j)).collect();
    let xk = x.select_columns(keep.iter());
    let yv = DVector::from_column_slice(y);
    let mut beta = vec![0.0; k];
    if !keep.is_empty() {
        let qr = xk.clone().qr();
        let qty = qr.q().transpose() * &yv;
        let b = qr
            .r()
            .solve_upper_triangular(&qty)
            .ok_or(OptimError::Singular)?;
        for (i, &j) in keep.iter().enumerate() {
            beta[j] = b[i];
        }
    }
    let fitted = x * DVector::from_column_slice(&beta);
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let sigma2 = residuals.iter().map(|r| r * r).sum::<f64>() / n.max(1) as f64;
    Ok(OlsFit {
        beta,
        dropped,
        residuals,
        sigma2,
    })
}
