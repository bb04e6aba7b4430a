//! Linear quantile regression and the three-scenario load set.
//!
//! The pinball-loss fit is solved through its LP dual
//!
//! ```text
//! max  y.d   s.t.  X'd = 0,  q - 1 <= d_i <= q
//! ```
//!
//! which has one row per coefficient instead of one per observation. The
//! coefficients are the duals of the `k` equality rows.

use epf_lp::{solve, LinearProgram, LpStatus, VarId};
use nalgebra::DMatrix;

use crate::optim::{independent_columns, ols};
use crate::timeseries::{HourlySeries, SeriesError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("quantile level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("{n} observations cannot identify {k} coefficients")]
    TooFewObservations { n: usize, k: usize },
    #[error("design has {rows} rows but the response has {len}")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("regressor row has {got} entries, model has {expected}")]
    RegressorLength { expected: usize, got: usize },
    #[error("non-finite value in the regression data")]
    NonFinite,
    #[error("quantile LP did not solve: {0}")]
    Solver(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileModel {
    pub q: f64,
    /// Intercept first when the design has a constant column.
    pub beta: Vec<f64>,
}

/// Fitted model plus the design columns dropped as linearly dependent
/// (their coefficients are 0).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub model: QuantileModel,
    pub dropped: Vec<usize>,
}

impl QuantileFit {
    pub fn is_degenerate(&self) -> bool {
        !self.dropped.is_empty()
    }
}

pub fn pinball_loss(q: f64, u: f64) -> f64 {
    if u < 0.0 {
        (q - 1.0) * u
    } else {
        q * u
    }
}

/// Minimises `sum pinball(q, y_i - x_i.beta)` exactly.
///
/// `x` is row-major with `k` columns per row.
pub fn fit_quantile_regression(
    x: &[Vec<f64>],
    y: &[f64],
    q: f64,
) -> Result<QuantileFit, DensityError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(DensityError::InvalidLevel(q));
    }
    let n = x.len();
    if n != y.len() {
        return Err(DensityError::DimensionMismatch {
            rows: n,
            len: y.len(),
        });
    }
    let k = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != k) {
        return Err(DensityError::RegressorLength {
            expected: k,
            got: x.iter().map(Vec::len).find(|&l| l != k).unwrap_or(0),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(DensityError::NonFinite);
    }
    if n < k + 1 {
        return Err(DensityError::TooFewObservations { n, k });
    }
    let design = DMatrix::from_fn(n, k, |i, j| x[i][j]);
    let keep = independent_columns(&design, 1e-9);
    let dropped: Vec<usize> = (0..k).filter(|j| !keep.contains(j)).collect();

    // start every observation at the bound matching its side of a shifted
    // least-squares line; the simplex then only repairs the few points near
    // the quantile line
    let reduced = design.select_columns(keep.iter());
    let start = ols(&reduced, y).map_err(|e| DensityError::Solver(e.to_string()))?;
    let mut res = start.residuals.clone();
    let shift = empirical_quantile(&mut res, q);
    let above: Vec<bool> = start.residuals.iter().map(|&r| r > shift).collect();

    // d_i = s_i * z_i with s_i = -1 above the line, so z starts at its lower
    // bound either way
    let mut lp = LinearProgram::new();
    let vars: Vec<VarId> = (0..n)
        .map(|i| {
            if above[i] {
                lp.add_var(y[i], -q, 1.0 - q)
            } else {
                lp.add_var(-y[i], q - 1.0, q)
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(keep.len());
    for &j in &keep {
        let coeffs: Vec<(VarId, f64)> = (0..n)
            .map(|i| (vars[i], if above[i] { -x[i][j] } else { x[i][j] }))
            .collect();
        rows.push(lp.add_eq(&coeffs, 0.0, format!("beta{j}")));
    }
    let sol = solve(&lp).map_err(|e| DensityError::Solver(e.to_string()))?;
    if sol.status != LpStatus::Optimal {
        return Err(DensityError::Solver(format!("{:?}", sol.status)));
    }
    let mut beta = vec![0.0; k];
    for (r, &j) in rows.iter().zip(&keep) {
        beta[j] = -sol.dual(*r);
    }
    Ok(QuantileFit {
        model: QuantileModel { q, beta },
        dropped,
    })
}

/// Lower empirical `q`-quantile (sorts `v`).
fn empirical_quantile(v: &mut [f64], q: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

pub fn predict_quantile(model: &QuantileModel, x: &[f64]) -> Result<f64, DensityError> {
    if x.len() != model.beta.len() {
        return Err(DensityError::RegressorLength {
            expected: model.beta.len(),
            got: x.len(),
        });
    }
    Ok(model.beta.iter().zip(x).map(|(b, v)| b * v).sum())
}

/// Scenario weights (low, expected, high).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioWeights {
    pub low: f64,
    pub expected: f64,
    pub high: f64,
}

impl Default for ScenarioWeights {
    fn default() -> Self {
        ScenarioWeights {
            low: 1.0 / 6.0,
            expected: 2.0 / 3.0,
            high: 1.0 / 6.0,
        }
    }
}

impl ScenarioWeights {
    pub fn equal() -> Self {
        ScenarioWeights {
            low: 1.0 / 3.0,
            expected: 1.0 / 3.0,
            high: 1.0 / 3.0,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.low, self.expected, self.high]
    }

    pub fn is_valid(&self) -> bool {
        let w = self.as_array();
        w.iter().all(|&v| v >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub low: HourlySeries,
    pub expected: HourlySeries,
    pub high: HourlySeries,
    pub weights: ScenarioWeights,
    /// Hours (0-based) where the quantile predictions crossed and were swapped.
    pub swapped_hours: Vec<usize>,
}

/// Low and high scenarios from the 5 % / 95 % models on regressors
/// `[1, point]`; the expected scenario is the point forecast itself.
pub fn build_scenarios(
    point2da: &HourlySeries,
    q05: &QuantileModel,
    q95: &QuantileModel,
    weights: ScenarioWeights,
) -> Result<ScenarioSet, DensityError> {
    let mut low = Vec::with_capacity(point2da.len());
    let mut high = Vec::with_capacity(point2da.len());
    let mut swapped_hours = Vec::new();
    for (h, &v) in point2da.values().iter().enumerate() {
        let mut lo = predict_quantile(q05, &[1.0, v])?;
        let mut hi = predict_quantile(q95, &[1.0, v])?;
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
            swapped_hours.push(h);
        }
        low.push(lo);
        high.push(hi);
    }
    Ok(ScenarioSet {
        low: replace(point2da, low)?,
        expected: point2da.clone(),
        high: replace(point2da, high)?,
        weights,
        swapped_hours,
    })
}

fn replace(like: &HourlySeries, values: Vec<f64>) -> Result<HourlySeries, SeriesError> {
    HourlySeries::new(like.start(), values, like.calendar().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::Calendar;

    fn total_loss(x: &[Vec<f64>], y: &[f64], beta: &[f64], q: f64) -> f64 {
        x.iter()
            .zip(y)
            .map(|(r, &yi)| {
                pinball_loss(q, yi - r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>())
            })
            .sum()
    }

    #[test]
    fn perfect_regressor_is_interpolated() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![1.0, i as f64 * 1.5 - 2.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[1]).collect();
        for q in [0.05, 0.5, 0.95] {
            let fit = fit_quantile_regression(&x, &y, q).unwrap();
            assert!(fit.model.beta[0].abs() < 1e-9 && (fit.model.beta[1] - 1.0).abs() < 1e-9);
            assert!(total_loss(&x, &y, &fit.model.beta, q) < 1e-9);
        }
    }

    #[test]
    fn intercept_only_quantiles() {
        let x = vec![vec![1.0]; 5];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let med = fit_quantile_regression(&x, &y, 0.5).unwrap();
        assert!((med.model.beta[0] - 3.0).abs() < 1e-9);
        let q90 = fit_quantile_regression(&x, &y, 0.9).unwrap();
        assert!((q90.model.beta[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn dependent_columns_are_dropped() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![1.0, i as f64, 2.0 * i as f64])
            .collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 + i as f64).collect();
        let fit = fit_quantile_regression(&x, &y, 0.5).unwrap();
        assert_eq!(fit.dropped, vec![2]);
        assert!(fit.is_degenerate());
        assert!((fit.model.beta[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![1.0]; 3];
        assert_eq!(
            fit_quantile_regression(&x, &[1.0; 3], 1.0),
            Err(DensityError::InvalidLevel(1.0))
        );
        assert!(matches!(
            fit_quantile_regression(&x, &[1.0; 2], 0.5),
            Err(DensityError::DimensionMismatch { .. })
        ));
        let m = QuantileModel {
            q: 0.5,
            beta: vec![1.0, 2.0],
        };
        assert!(matches!(
            predict_quantile(&m, &[1.0]),
            Err(DensityError::RegressorLength { .. })
        ));
    }

    #[test]
    fn predict_examples() {
        let m = |b: Vec<f64>| QuantileModel { q: 0.5, beta: b };
        assert_eq!(
            predict_quantile(&m(vec![0.0, 1.0]), &[1.0, 42.0]).unwrap(),
            42.0
        );
        assert_eq!(
            predict_quantile(&m(vec![10.0, 0.0]), &[1.0, -3.0]).unwrap(),
            10.0
        );
        assert_eq!(
            predict_quantile(&m(vec![1.0, 2.0]), &[1.0, 3.0]).unwrap(),
            7.0
        );
    }

    fn point(v: f64) -> HourlySeries {
        HourlySeries::from_days(0, vec![v; 24], &Calendar::new(1, [])).unwrap()
    }

    #[test]
    fn symmetric_scenarios() {
        let lo = QuantileModel {
            q: 0.05,
            beta: vec![-100.0, 1.0],
        };
        let hi = QuantileModel {
            q: 0.95,
            beta: vec![100.0, 1.0],
        };
        let s = build_scenarios(&point(50_000.0), &lo, &hi, ScenarioWeights::default()).unwrap();
        assert!(s.low.values().iter().all(|&v| v == 49_900.0));
        assert!(s.expected.values().iter().all(|&v| v == 50_000.0));
        assert!(s.high.values().iter().all(|&v| v == 50_100.0));
        assert!(s.swapped_hours.is_empty());
        assert!(s.weights.is_valid());

        let crossed =
            build_scenarios(&point(50_000.0), &hi, &lo, ScenarioWeights::default()).unwrap();
        assert_eq!(crossed.swapped_hours.len(), 24);
        assert!(crossed.low.values()[0] <= crossed.high.values()[0]);
    }
}
