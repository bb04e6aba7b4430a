//! Load forecast improvement: the TSO forecast error is split into a weekly
//! profile and a SARMA(1,1)x(1,1)_24 remainder, and a two-day-ahead forecast
//! of the TSO forecast itself comes from a SARMAX with a lag-168 regressor.

use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::optim::{levenberg_marquardt, ols, LmOptions, OptimError};
use crate::timeseries::{HourlySeries, SeriesError, WindowSpec};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LoadError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("series are not aligned on the same hour range")]
    Alignment,
    #[error("no observation for hour {hour} on weekday {weekday}")]
    EmptyCell { hour: u8, weekday: u8 },
    #[error("need at least {needed} hours of history, got {got}")]
    TooShort { needed: usize, got: usize },
}

/// Actual load and the TSO's day-ahead forecast on the same hours.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadRecord {
    pub actual: HourlySeries,
    pub tso_forecast: HourlySeries,
}

/// `actual - tso_forecast`.
pub fn forecast_error(rec: &LoadRecord) -> Result<HourlySeries, LoadError> {
    rec.actual
        .zip_with(&rec.tso_forecast, |a, f| a - f)
        .map_err(|_| LoadError::Alignment)
}

/// `l* = l + eps_hat`.
pub fn improve_forecast(
    tso: &HourlySeries,
    eps_hat: &HourlySeries,
) -> Result<HourlySeries, LoadError> {
    tso.zip_with(eps_hat, |l, e| l + e)
        .map_err(|_| LoadError::Alignment)
}

/// Mean error per (hour, weekday).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalProfile {
    hs: [[f64; 7]; 24],
}

impl SeasonalProfile {
    pub fn constant(c: f64) -> Self {
        SeasonalProfile { hs: [[c; 7]; 24] }
    }

    /// Mean error for `hour` in 1..=24 and `weekday` in 1..=7.
    pub fn get(&self, hour: u8, weekday: u8) -> f64 {
        self.hs[usize::from(hour) - 1][usize::from(weekday) - 1]
    }

    /// Profile lookup for each hour of `like`.
    pub fn component(&self, like: &HourlySeries) -> HourlySeries {
        let values = (0..like.len())
            .map(|k| self.get(like.stamp(k).hour, like.flags(k).weekday))
            .collect();
        HourlySeries::new(like.start(), values, like.calendar().to_vec())
            .expect("profile values are finite")
    }
}

/// Averages `errors` over the last `window.length_days` days of the series
/// (all of it when shorter) per hour of day and weekday.
pub fn fit_seasonal_profile(
    errors: &HourlySeries,
    window: WindowSpec,
) -> Result<SeasonalProfile, LoadError> {
    let n = errors.len().min(window.length_days * 24);
    let first = errors.len() - n;
    let mut sum = [[0.0; 7]; 24];
    let mut count = [[0usize; 7]; 24];
    for k in first..errors.len() {
        let h = usize::from(errors.stamp(k).hour) - 1;
        let w = usize::from(errors.flags(k).weekday) - 1;
        sum[h][w] += errors.values()[k];
        count[h][w] += 1;
    }
    let mut hs = [[0.0; 7]; 24];
    for h in 0..24 {
        for w in 0..7 {
            if count[h][w] == 0 {
                return Err(LoadError::EmptyCell {
                    hour: h as u8 + 1,
                    weekday: w as u8 + 1,
                });
            }
            hs[h][w] = sum[h][w] / count[h][w] as f64;
        }
    }
    Ok(SeasonalProfile { hs })
}

/// Profile lookup for the hours of `hours`.
pub fn seasonal_component(profile: &SeasonalProfile, hours: &HourlySeries) -> HourlySeries {
    profile.component(hours)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SarmaParams {
    pub phi0: f64,
    pub phi1: f64,
    pub phi24: f64,
    pub omega1: f64,
    pub omega24: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SarmaxParams {
    pub sarma: SarmaParams,
    pub phi168: f64,
}

/// Convergence information of a conditional-sum-of-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub converged: bool,
    pub iterations: usize,
    /// Objective after each accepted optimiser step.
    pub objective_trace: Vec<f64>,
    /// False when an AR coefficient ended within 1e-3 of the unit circle.
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarmaFit {
    pub params: SarmaParams,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarmaxFit {
    pub params: SarmaxParams,
    pub report: FitReport,
}

fn lag(v: &[f64], t: usize, k: usize) -> f64 {
    if t >= k {
        v[t - k]
    } else {
        0.0
    }
}

/// Conditional mean of `y[t]` given everything before `t`; values before the
/// start of the arrays count as zero.
fn conditional_mean(p: &SarmaParams, y: &[f64], psi: &[f64], t: usize) -> f64 {
    p.phi0 + p.phi1 * lag(y, t, 1) + p.phi24 * lag(y, t, 24) - p.phi1 * p.phi24 * lag(y, t, 25)
        + p.omega1 * lag(psi, t, 1)
        + p.omega24 * lag(psi, t, 24)
        + p.omega1 * p.omega24 * lag(psi, t, 25)
}

fn sarmax_mean(p: &SarmaxParams, y: &[f64], psi: &[f64], t: usize) -> f64 {
    conditional_mean(&p.sarma, y, psi, t) + p.phi168 * lag(y, t, 168)
}

/// Innovations of the SARMA recursion with zero pre-sample values.
pub fn sarma_innovations(params: &SarmaParams, rc: &[f64]) -> Vec<f64> {
    let mut psi = vec![0.0; rc.len()];
    for t in 0..rc.len() {
        psi[t] = rc[t] - conditional_mean(params, rc, &psi, t);
    }
    psi
}

/// Forward recursion: the series generated by `psi` under `params`.
pub fn sarma_generate(params: &SarmaParams, psi: &[f64]) -> Vec<f64> {
    let mut rc = vec![0.0; psi.len()];
    for t in 0..psi.len() {
        rc[t] = conditional_mean(params, &rc, psi, t) + psi[t];
    }
    rc
}

/// Innovations of the SARMAX recursion, conditioning on the first 168 values
/// (their innovations are zero).
pub fn sarmax_innovations(params: &SarmaxParams, y: &[f64]) -> Vec<f64> {
    let mut psi = vec![0.0; y.len()];
    for t in 168..y.len() {
        psi[t] = y[t] - sarmax_mean(params, y, &psi, t);
    }
    psi
}

/// Forward SARMAX recursion driven by `psi`, started from `initial`.
pub fn sarmax_generate(params: &SarmaxParams, initial: &[f64], psi: &[f64]) -> Vec<f64> {
    let mut y = initial.to_vec();
    let mut all_psi = vec![0.0; initial.len()];
    all_psi.extend_from_slice(psi);
    for t in initial.len()..all_psi.len() {
        let v = sarmax_mean(params, &y, &all_psi, t) + all_psi[t];
        y.push(v);
    }
    y
}

fn recursive_forecast(
    y_hist: &[f64],
    psi_hist: &[f64],
    steps: usize,
    mean: impl Fn(&[f64], &[f64], usize) -> f64,
) -> Vec<f64> {
    let mut y = y_hist.to_vec();
    let mut psi = psi_hist.to_vec();
    for _ in 0..steps {
        let t = y.len();
        let v = mean(&y, &psi, t);
        y.push(v);
        psi.push(0.0);
    }
    y.split_off(y_hist.len())
}

/// `steps`-ahead recursive forecast of the SARMA remainder; future
/// innovations are zero.
pub fn forecast_rc(params: &SarmaParams, rc_hist: &[f64], steps: usize) -> Vec<f64> {
    let psi = sarma_innovations(params, rc_hist);
    recursive_forecast(rc_hist, &psi, steps, |y, psi, t| {
        conditional_mean(params, y, psi, t)
    })
}

/// Recursive forecast of the SARMAX series over `steps` hours after the history.
pub fn forecast_sarmax(params: &SarmaxParams, y_hist: &[f64], steps: usize) -> Vec<f64> {
    let psi = sarmax_innovations(params, y_hist);
    recursive_forecast(y_hist, &psi, steps, |y, psi, t| {
        sarmax_mean(params, y, psi, t)
    })
}

/// Forecast error for the `steps` hours after `history` ends:
/// seasonal profile plus the SARMA remainder forecast.
pub fn forecast_error_ahead(
    params: &SarmaParams,
    profile: &SeasonalProfile,
    history: &HourlySeries,
    steps: usize,
) -> Result<HourlySeries, LoadError> {
    if history.len() < 26 {
        return Err(LoadError::TooShort {
            needed: 26,
            got: history.len(),
        });
    }
    let sc = profile.component(history);
    let rc: Vec<f64> = history
        .values()
        .iter()
        .zip(sc.values())
        .map(|(e, s)| e - s)
        .collect();
    let rc_hat = forecast_rc(params, &rc, steps);
    let shell = history.continuation(vec![0.0; steps])?;
    let sc_future = profile.component(&shell);
    let values = rc_hat
        .iter()
        .zip(sc_future.values())
        .map(|(r, s)| r + s)
        .collect();
    Ok(history.continuation(values)?)
}

/// Forecast error for the 24 hours after `history` ends.
pub fn forecast_error_24h(
    params: &SarmaParams,
    profile: &SeasonalProfile,
    history: &HourlySeries,
) -> Result<HourlySeries, LoadError> {
    forecast_error_ahead(params, profile, history, 24)
}

fn stationary(phi1: f64, phi24: f64) -> bool {
    phi1.abs() < 0.999 && phi24.abs() < 0.999
}

fn report(res: &crate::optim::LmResult, phi1: f64, phi24: f64) -> FitReport {
    FitReport {
        converged: res.converged,
        iterations: res.iterations,
        objective_trace: res.history.clone(),
        stationary: stationary(phi1, phi24),
    }
}

/// CSS fit with the hourly and/or daily ARMA pair held at zero.
fn css_sarma(y: &[f64], hourly: bool, daily: bool) -> (SarmaParams, crate::optim::LmResult) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let unpack = |x: &[f64]| {
        let mut p = SarmaParams {
            phi0: x[0],
            ..Default::default()
        };
        let mut k = 1;
        if hourly {
            p.phi1 = x[k].tanh();
            p.omega1 = x[k + 1];
            k += 2;
        }
        if daily {
            p.phi24 = x[k].tanh();
            p.omega24 = x[k + 1];
        }
        p
    };
    let n_par = 1 + 2 * (hourly as usize + daily as usize);
    let mut x0 = vec![0.0; n_par];
    x0[0] = mean;
    let res = levenberg_marquardt(
        |x, out| {
            let p = unpack(x);
            if p.omega1.abs() >= 1.0 || p.omega24.abs() >= 1.0 {
                return false;
            }
            for t in 0..y.len() {
                out[t] = y[t] - conditional_mean(&p, y, out, t);
            }
            true
        },
        &x0,
        y.len(),
        &LmOptions::default(),
    );
    let mut params = unpack(&res.x);
    params.sigma2 = res.cost / y.len() as f64;
    (params, res)
}

/// Conditional-sum-of-squares fit. The AR coefficients are optimised through
/// `tanh` so they stay inside (-1, 1); MA coefficients outside (-1, 1) are
/// rejected.
///
/// An ARMA pair with `phi ~ -omega` is a common factor that leaves the
/// likelihood flat along a ridge. Such pairs are refitted at zero and the
/// reduced model is kept unless a 1 % likelihood-ratio test rejects it.
pub fn fit_sarma(rc: &HourlySeries) -> Result<SarmaFit, LoadError> {
    let y = rc.values();
    if y.len() < 30 * 24 {
        return Err(LoadError::TooShort {
            needed: 30 * 24,
            got: y.len(),
        });
    }
    let (mut params, mut res) = css_sarma(y, true, true);
    let cancels = |phi: f64, omega: f64| (phi + omega).abs() < 0.1;
    let keep_hourly = !cancels(params.phi1, params.omega1);
    let keep_daily = !cancels(params.phi24, params.omega24);
    if !(keep_hourly && keep_daily) && params.sigma2 > 0.0 {
        let (p_r, res_r) = css_sarma(y, keep_hourly, keep_daily);
        let df = 2.0 * (!keep_hourly as usize + !keep_daily as usize) as f64;
        let lr = y.len() as f64 * (p_r.sigma2 / params.sigma2).ln();
        let critical = ChiSquared::new(df)
            .map(|c| c.inverse_cdf(0.99))
            .unwrap_or(f64::INFINITY);
        if lr < critical {
            let iterations = res.iterations + res_r.iterations;
            params = p_r;
            res = res_r;
            res.iterations = iterations;
        }
    }
    Ok(SarmaFit {
        report: report(&res, params.phi1, params.phi24),
        params,
    })
}

/// Conditional-sum-of-squares fit of the SARMAX model on the TSO forecast
/// history, started from a least-squares autoregression.
pub fn fit_sarmax_2da(tso_history: &HourlySeries) -> Result<SarmaxFit, LoadError> {
    let y = tso_history.values();
    let needed = 168 + 30 * 24;
    if y.len() < needed {
        return Err(LoadError::TooShort {
            needed,
            got: y.len(),
        });
    }
    let rows = y.len() - 168;
    let x = DMatrix::from_fn(rows, 5, |i, j| {
        let t = i + 168;
        match j {
            0 => 1.0,
            1 => y[t - 1],
            2 => y[t - 24],
            3 => y[t - 25],
            _ => y[t - 168],
        }
    });
    let start = ols(&x, &y[168..])?;
    let phi1 = start.beta[1].clamp(-0.95, 0.95);
    let phi24 = start.beta[2].clamp(-0.95, 0.95);
    let phi168 = start.beta[4];
    let phi0 = (168..y.len())
        .map(|t| {
            y[t] - phi1 * y[t - 1] - phi24 * y[t - 24] + phi1 * phi24 * y[t - 25]
                - phi168 * y[t - 168]
        })
        .sum::<f64>()
        / rows as f64;

    let unpack = |x: &[f64]| SarmaxParams {
        sarma: SarmaParams {
            phi0: x[0],
            phi1: x[1].tanh(),
            phi24: x[2].tanh(),
            omega1: x[3],
            omega24: x[4],
            sigma2: 0.0,
        },
        phi168: x[5],
    };
    let res = levenberg_marquardt(
        |x, out| {
            let p = unpack(x);
            if p.sarma.omega1.abs() >= 1.0 || p.sarma.omega24.abs() >= 1.0 {
                return false;
            }
            let psi = sarmax_innovations(&p, y);
            out.copy_from_slice(&psi[168..]);
            true
        },
        &[phi0, phi1.atanh(), phi24.atanh(), 0.0, 0.0, phi168],
        rows,
        &LmOptions::default(),
    );
    let mut params = unpack(&res.x);
    params.sarma.sigma2 = res.cost / rows as f64;
    Ok(SarmaxFit {
        report: report(&res, params.sarma.phi1, params.sarma.phi24),
        params,
    })
}

/// Two-day-ahead forecast: forecasts 48 hours past the end of `tso_history`
/// and returns hours 25..=48, the day after next.
pub fn forecast_2da(
    params: &SarmaxParams,
    tso_history: &HourlySeries,
) -> Result<HourlySeries, LoadError> {
    if tso_history.len() < 169 {
        return Err(LoadError::TooShort {
            needed: 169,
            got: tso_history.len(),
        });
    }
    let path = forecast_sarmax(params, tso_history.values(), 48);
    let both = tso_history.continuation(path)?;
    let first = both.start().day;
    Ok(both.days(first + 1, first + 1)?)
}
