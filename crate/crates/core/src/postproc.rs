//! Price-error post-processing: six ARX sub-models on the dispatch price
//! error, their average as the point forecast, and quantile regression
//! averaging over the six for the predictive distribution.

use nalgebra::DMatrix;

use crate::density::{
    fit_quantile_regression, predict_quantile, DensityError, QuantileFit, QuantileModel,
};
use crate::optim::{levenberg_marquardt, ols, LmOptions, OptimError};

/// Quantile levels 0.05, 0.10, ..., 0.95.
pub const QUANTILE_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80,
    0.85, 0.90, 0.95,
];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PostprocError {
    #[error("panel does not cover days {from}..={to}")]
    Coverage { from: i64, to: i64 },
    #[error("panel fields are not aligned")]
    Alignment,
    #[error("sub-model {0} has no forecast")]
    MissingSubModel(String),
    #[error("{0} quantile models are missing")]
    MissingQuantiles(usize),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Daily panel of price errors `actual - estimator` with the exogenous
/// inputs. `holiday` and `wind` may run further than `eps`, since they are
/// known for the day being forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceErrorPanel {
    pub first_day: i64,
    pub eps: Vec<[f64; 24]>,
    pub holiday: Vec<bool>,
    pub wind: Vec<[f64; 24]>,
}

impl PriceErrorPanel {
    pub fn new(
        first_day: i64,
        eps: Vec<[f64; 24]>,
        holiday: Vec<bool>,
        wind: Vec<[f64; 24]>,
    ) -> Result<Self, PostprocError> {
        if holiday.len() != wind.len() || holiday.len() < eps.len() {
            return Err(PostprocError::Alignment);
        }
        Ok(PriceErrorPanel {
            first_day,
            eps,
            holiday,
            wind,
        })
    }

    /// Last day with an observed error.
    pub fn last_observed(&self) -> i64 {
        self.first_day + self.eps.len() as i64 - 1
    }

    pub fn last_exogenous(&self) -> i64 {
        self.first_day + self.holiday.len() as i64 - 1
    }

    fn idx(&self, day: i64) -> usize {
        (day - self.first_day) as usize
    }

    pub fn eps_day(&self, day: i64) -> &[f64; 24] {
        &self.eps[self.idx(day)]
    }

    pub fn eps_min(&self, day: i64) -> f64 {
        self.eps_day(day)
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eps_max(&self, day: i64) -> f64 {
        self.eps_day(day)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_holiday(&self, day: i64) -> bool {
        self.holiday[self.idx(day)]
    }

    pub fn wind_at(&self, day: i64, hour: usize) -> f64 {
        self.wind[self.idx(day)][hour]
    }

    /// Checks that errors exist for `from..=last` and inputs for `target`.
    fn require(&self, from: i64, last: i64, target: i64) -> Result<(), PostprocError> {
        if from < self.first_day || last > self.last_observed() || target > self.last_exogenous() {
            return Err(PostprocError::Coverage { from, to: target });
        }
        Ok(())
    }
}

/// Univariate ARX on the hourly error series: `phi` multiplies
/// `[1, e(t-1), e(t-2), e(t-24), e(t-168), psi(t-1)]`, `omega` the previous
/// day's minimum and maximum error, the holiday dummy and the wind forecast.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UvArxParams {
    pub phi: [f64; 6],
    pub omega: [f64; 4],
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UvArxFit {
    pub params: UvArxParams,
    pub converged: bool,
    pub iterations: usize,
}

/// One hour of the multivariate ARX: `phi` multiplies
/// `[1, e(h, d-1), e(h, d-7)]`, `omega` as in the univariate model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MvHourParams {
    pub phi: [f64; 3],
    pub omega: [f64; 4],
    pub sigma2: f64,
    /// Regressors dropped as linearly dependent (0 = intercept, then phi, omega).
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvArxParams {
    pub hours: Vec<MvHourParams>,
}

impl MvArxParams {
    pub fn is_degenerate(&self) -> bool {
        self.hours.iter().any(|h| !h.dropped.is_empty())
    }
}

/// Exogenous regressors of hour `h` on day `d`.
fn exogenous(panel: &PriceErrorPanel, day: i64, hour: usize) -> [f64; 4] {
    [
        panel.eps_min(day - 1),
        panel.eps_max(day - 1),
        if panel.is_holiday(day) { 1.0 } else { 0.0 },
        panel.wind_at(day, hour),
    ]
}

/// Static part of the univariate design (all but the MA column) and the
/// error values for the hours of `from..=to`.
struct UvDesign {
    rows: Vec<[f64; 9]>,
    y: Vec<f64>,
}

fn uv_design(panel: &PriceErrorPanel, from: i64, to: i64) -> UvDesign {
    let flat: Vec<f64> = (from - 7..=to).flat_map(|d| *panel.eps_day(d)).collect();
    let mut rows = Vec::with_capacity(flat.len() - 168);
    let mut y = Vec::with_capacity(flat.len() - 168);
    for t in 168..flat.len() {
        let day = from + ((t - 168) / 24) as i64;
        let ex = exogenous(panel, day, t % 24);
        rows.push([
            1.0,
            flat[t - 1],
            flat[t - 2],
            flat[t - 24],
            flat[t - 168],
            ex[0],
            ex[1],
            ex[2],
            ex[3],
        ]);
        y.push(flat[t]);
    }
    UvDesign { rows, y }
}

/// Static coefficients in design order, i.e. without the MA term.
fn uv_static(p: &UvArxParams) -> [f64; 9] {
    [
        p.phi[0], p.phi[1], p.phi[2], p.phi[3], p.phi[4], p.omega[0], p.omega[1], p.omega[2],
        p.omega[3],
    ]
}

fn uv_innovations_into(design: &UvDesign, beta: &[f64; 9], ma: f64, out: &mut [f64]) {
    let mut prev = 0.0;
    for (t, row) in design.rows.iter().enumerate() {
        let fit: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        prev = design.y[t] - fit - ma * prev;
        out[t] = prev;
    }
}

/// Conditional-sum-of-squares fit on the `weeks * 7` days before `day`.
/// Needs errors for the week before the window as lags. The MA coefficient
/// is kept inside (-1, 1). `start` seeds the optimiser, e.g. with the
/// previous day's estimate; otherwise least squares without the MA term.
pub fn fit_uv(
    panel: &PriceErrorPanel,
    day: i64,
    weeks: usize,
    start: Option<&UvArxParams>,
) -> Result<UvArxFit, PostprocError> {
    fit_uv_days(panel, day, 7 * weeks, start)
}

/// `fit_uv` over a window of `days` days.
pub fn fit_uv_days(
    panel: &PriceErrorPanel,
    day: i64,
    days: usize,
    start: Option<&UvArxParams>,
) -> Result<UvArxFit, PostprocError> {
    let from = day - days as i64;
    panel.require(from - 7, day - 1, day - 1)?;
    let design = uv_design(panel, from, day - 1);
    let n = design.y.len();
    let x0: Vec<f64> = match start {
        Some(p) => {
            let mut v = uv_static(p).to_vec();
            v.push(p.phi[5].clamp(-0.99, 0.99));
            v
        }
        None => {
            let x = DMatrix::from_fn(n, 9, |i, j| design.rows[i][j]);
            let mut v = ols(&x, &design.y)?.beta;
            v.push(0.0);
            v
        }
    };
    let res = levenberg_marquardt(
        |x, out| {
            if x[9].abs() >= 1.0 {
                return false;
            }
            let beta: [f64; 9] = x[..9].try_into().expect("nine static coefficients");
            uv_innovations_into(&design, &beta, x[9], out);
            true
        },
        &x0,
        n,
        &LmOptions::default(),
    );
    let x = &res.x;
    Ok(UvArxFit {
        params: UvArxParams {
            phi: [x[0], x[1], x[2], x[3], x[4], x[9]],
            omega: [x[5], x[6], x[7], x[8]],
            sigma2: res.cost / n as f64,
        },
        converged: res.converged,
        iterations: res.iterations,
    })
}

/// Recursive 24-hour forecast of the error on `day`. In-sample innovations
/// are rebuilt over up to 52 weeks of history; future innovations are 0 and
/// unobserved lags are replaced by their forecasts.
pub fn forecast_uv(
    params: &UvArxParams,
    panel: &PriceErrorPanel,
    day: i64,
) -> Result<[f64; 24], PostprocError> {
    let from = (day - 364).max(panel.first_day + 7);
    panel.require(from - 7, day - 1, day)?;
    let design = uv_design(panel, from, day - 1);
    let mut psi = vec![0.0; design.y.len()];
    uv_innovations_into(&design, &uv_static(params), params.phi[5], &mut psi);
    let last_psi = psi.last().copied().unwrap_or(0.0);

    let mut hist: Vec<f64> = (day - 7..day).flat_map(|d| *panel.eps_day(d)).collect();
    let p = params;
    let mut out = [0.0; 24];
    for (h, slot) in out.iter_mut().enumerate() {
        let t = hist.len();
        let ex = exogenous(panel, day, h);
        let ma = if h == 0 { last_psi } else { 0.0 };
        let v = p.phi[0]
            + p.phi[1] * hist[t - 1]
            + p.phi[2] * hist[t - 2]
            + p.phi[3] * hist[t - 24]
            + p.phi[4] * hist[t - 168]
            + p.phi[5] * ma
            + p.omega.iter().zip(ex).map(|(w, x)| w * x).sum::<f64>();
        *slot = v;
        hist.push(v);
    }
    Ok(out)
}

fn mv_row(panel: &PriceErrorPanel, day: i64, hour: usize) -> [f64; 7] {
    let ex = exogenous(panel, day, hour);
    [
        1.0,
        panel.eps_day(day - 1)[hour],
        panel.eps_day(day - 7)[hour],
        ex[0],
        ex[1],
        ex[2],
        ex[3],
    ]
}

/// Independent least-squares fits per hour on the `weeks * 7` days before
/// `day`.
pub fn fit_mv(
    panel: &PriceErrorPanel,
    day: i64,
    weeks: usize,
) -> Result<MvArxParams, PostprocError> {
    fit_mv_days(panel, day, 7 * weeks)
}

/// `fit_mv` over a window of `days` days.
pub fn fit_mv_days(
    panel: &PriceErrorPanel,
    day: i64,
    days: usize,
) -> Result<MvArxParams, PostprocError> {
    let from = day - days as i64;
    panel.require(from - 7, day - 1, day - 1)?;
    let days: Vec<i64> = (from..day).collect();
    let mut hours = Vec::with_capacity(24);
    for h in 0..24 {
        let x = DMatrix::from_fn(days.len(), 7, |i, j| mv_row(panel, days[i], h)[j]);
        let y: Vec<f64> = days.iter().map(|&d| panel.eps_day(d)[h]).collect();
        let fit = ols(&x, &y)?;
        let b = &fit.beta;
        hours.push(MvHourParams {
            phi: [b[0], b[1], b[2]],
            omega: [b[3], b[4], b[5], b[6]],
            sigma2: fit.sigma2,
            dropped: fit.dropped,
        });
    }
    Ok(MvArxParams { hours })
}

/// One-step forecast of each hour of `day`; all lags are observed.
pub fn forecast_mv(
    params: &MvArxParams,
    panel: &PriceErrorPanel,
    day: i64,
) -> Result<[f64; 24], PostprocError> {
    panel.require(day - 7, day - 1, day)?;
    let mut out = [0.0; 24];
    for (h, slot) in out.iter_mut().enumerate() {
        let p = &params.hours[h];
        let coef = [
            p.phi[0], p.phi[1], p.phi[2], p.omega[0], p.omega[1], p.omega[2], p.omega[3],
        ];
        *slot = mv_row(panel, day, h)
            .iter()
            .zip(coef)
            .map(|(a, b)| a * b)
            .sum();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Framework {
    Univariate,
    Multivariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubModel {
    pub framework: Framework,
    pub weeks: usize,
}

impl SubModel {
    pub fn name(&self) -> String {
        match self.framework {
            Framework::Univariate => format!("uv{}", self.weeks),
            Framework::Multivariate => format!("mv{}", self.weeks),
        }
    }
}

pub const SUB_MODELS: [SubModel; 6] = [
    SubModel {
        framework: Framework::Univariate,
        weeks: 44,
    },
    SubModel {
        framework: Framework::Univariate,
        weeks: 48,
    },
    SubModel {
        framework: Framework::Univariate,
        weeks: 52,
    },
    SubModel {
        framework: Framework::Multivariate,
        weeks: 44,
    },
    SubModel {
        framework: Framework::Multivariate,
        weeks: 48,
    },
    SubModel {
        framework: Framework::Multivariate,
        weeks: 52,
    },
];

/// Price forecasts (estimator plus forecast error) of the six sub-models,
/// in `SUB_MODELS` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubModelForecasts {
    pub day: i64,
    pub prices: [Option<[f64; 24]>; 6],
}

impl SubModelForecasts {
    pub fn from_errors(day: i64, base: &[f64; 24], errors: [Option<[f64; 24]>; 6]) -> Self {
        let prices = errors.map(|e| e.map(|e| std::array::from_fn(|h| base[h] + e[h])));
        SubModelForecasts { day, prices }
    }

    pub fn complete(&self) -> Result<[[f64; 24]; 6], PostprocError> {
        let mut out = [[0.0; 24]; 6];
        for (i, p) in self.prices.iter().enumerate() {
            out[i] = p.ok_or_else(|| PostprocError::MissingSubModel(SUB_MODELS[i].name()))?;
        }
        Ok(out)
    }

    pub fn regressors(&self, hour: usize) -> Result<[f64; 6], PostprocError> {
        let all = self.complete()?;
        Ok(std::array::from_fn(|i| all[i][hour]))
    }
}

/// Arithmetic mean of the six price forecasts.
pub fn combine_point(six: &SubModelForecasts) -> Result<[f64; 24], PostprocError> {
    let all = six.complete()?;
    Ok(std::array::from_fn(|h| {
        all.iter().map(|p| p[h]).sum::<f64>() / 6.0
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    Peak,
    OffPeak,
}

/// One training hour for quantile regression averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QraRow {
    pub regressors: [f64; 6],
    pub actual: f64,
    pub segment: Segment,
}

/// Quantile regression of the actual price on `[1, six forecasts]` over the
/// rows of one segment.
pub fn fit_price_qra(
    rows: &[QraRow],
    q: f64,
    segment: Segment,
) -> Result<QuantileFit, PostprocError> {
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.segment == segment)
        .map(|r| {
            let mut x = Vec::with_capacity(7);
            x.push(1.0);
            x.extend_from_slice(&r.regressors);
            (x, r.actual)
        })
        .unzip();
    Ok(fit_quantile_regression(&x, &y, q)?)
}

/// Quantile models over `QUANTILE_GRID` for both segments.
#[derive(Debug, Clone, PartialEq)]
pub struct QraModels {
    pub peak: Vec<QuantileModel>,
    pub off_peak: Vec<QuantileModel>,
    /// Number of fits that dropped collinear regressors.
    pub degenerate_fits: usize,
}

pub fn fit_qra_grid(rows: &[QraRow]) -> Result<QraModels, PostprocError> {
    let mut degenerate_fits = 0;
    let mut fit_segment = |segment| -> Result<Vec<QuantileModel>, PostprocError> {
        QUANTILE_GRID
            .iter()
            .map(|&q| {
                let fit = fit_price_qra(rows, q, segment)?;
                degenerate_fits += usize::from(fit.is_degenerate());
                Ok(fit.model)
            })
            .collect()
    };
    let peak = fit_segment(Segment::Peak)?;
    let off_peak = fit_segment(Segment::OffPeak)?;
    Ok(QraModels {
        peak,
        off_peak,
        degenerate_fits,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticForecast {
    pub day: i64,
    pub point: [f64; 24],
    /// Per hour, one value per `QUANTILE_GRID` level, non-decreasing.
    pub quantiles: Vec<[f64; 19]>,
    pub peak: [bool; 24],
    /// Hours whose raw quantiles crossed and were sorted.
    pub rearranged: Vec<usize>,
}

/// Evaluates the quantile models of each hour's segment and sorts crossing
/// quantiles into order.
pub fn predict_probabilistic(
    models: &QraModels,
    six: &SubModelForecasts,
    peak: [bool; 24],
) -> Result<ProbabilisticForecast, PostprocError> {
    for set in [&models.peak, &models.off_peak] {
        if set.len() != QUANTILE_GRID.len() {
            return Err(PostprocError::MissingQuantiles(
                QUANTILE_GRID.len().saturating_sub(set.len()),
            ));
        }
    }
    let point = combine_point(six)?;
    let mut quantiles = Vec::with_capacity(24);
    let mut rearranged = Vec::new();
    for h in 0..24 {
        let mut x = vec![1.0];
        x.extend_from_slice(&six.regressors(h)?);
        let set = if peak[h] {
            &models.peak
        } else {
            &models.off_peak
        };
        let mut v = [0.0; 19];
        for (slot, m) in v.iter_mut().zip(set) {
            *slot = predict_quantile(m, &x)?;
        }
        if v.windows(2).any(|w| w[1] < w[0]) {
            v.sort_by(f64::total_cmp);
            rearranged.push(h);
        }
        quantiles.push(v);
    }
    Ok(ProbabilisticForecast {
        day: six.day,
        point,
        quantiles,
        peak,
        rearranged,
    })
}

/// Probability of a negative price in `hour`, read off the piecewise-linear
/// quantile function. Beyond the outer quantiles the first or last segment
/// is extended linearly, so the tails stay within `[0, 0.05]` and
/// `[0.95, 1]`.
pub fn negative_price_probability(f: &ProbabilisticForecast, hour: usize) -> f64 {
    let v = &f.quantiles[hour];
    let q = &QUANTILE_GRID;
    let last = v.len() - 1;
    if v[0] >= 0.0 {
        let span = v[1] - v[0];
        if span <= 0.0 {
            return 0.0;
        }
        return (q[0] * (1.0 - v[0] / span)).clamp(0.0, q[0]);
    }
    if v[last] < 0.0 {
        let span = v[last] - v[last - 1];
        if span <= 0.0 {
            return 1.0;
        }
        return (q[last] + (1.0 - q[last]) * (-v[last] / span)).clamp(q[last], 1.0);
    }
    for k in 0..last {
        if v[k] < 0.0 && v[k + 1] >= 0.0 {
            let w = -v[k] / (v[k + 1] - v[k]);
            return (q[k] + w * (q[k + 1] - q[k])).clamp(0.0, 1.0);
        }
    }
    unreachable!("quantiles are sorted, so 0 falls in some segment")
}
