//! Per-day computations of the four stages. Target day `D` is the price
//! delivery day; its dispatch window covers `D-1 ..= D+1`.

use std::collections::BTreeMap;

use epf_core::density::{build_scenarios, fit_quantile_regression, DensityError};
use epf_core::dispatch::{
    solve_instance, ClusterKind, DispatchError, DispatchInstance, NtcMatrix, TechnologyCluster,
    ThermalParams, ValueStep, ZoneData, HORIZON,
};
use epf_core::load::{
    fit_sarma, fit_sarmax_2da, fit_seasonal_profile, forecast_2da, forecast_error_ahead, LoadError,
    SarmaParams, SarmaxParams,
};
use epf_core::postproc::{
    fit_mv, fit_qra_grid, fit_uv, forecast_mv, forecast_uv, negative_price_probability,
    predict_probabilistic, PostprocError, PriceErrorPanel, QraRow, Segment, SubModelForecasts,
};
use epf_core::timeseries::{is_peak, Calendar, HourlySeries, SeriesError, WindowSpec};
use serde::{Deserialize, Serialize};

use crate::config::{Mode, PipelineConfig};
use crate::dataset::{ClusterKindTag, ClusterSpec, Dataset, DayGrid};

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Postproc(#[from] PostprocError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// The wind regressor of the price-error models is in GW.
const WIND_SCALE: f64 = 1e-3;

/// Shared read-only inputs of every stage.
pub struct Context<'a> {
    pub ds: &'a Dataset,
    pub cfg: &'a PipelineConfig,
    pub calendar: Calendar,
}

impl<'a> Context<'a> {
    pub fn new(ds: &'a Dataset, cfg: &'a PipelineConfig) -> Self {
        Context {
            ds,
            cfg,
            calendar: ds.calendar(&cfg.focal_zone),
        }
    }

    fn focal(&self) -> &str {
        &self.cfg.focal_zone
    }

    fn grid<'g>(
        &self,
        map: &'g BTreeMap<String, DayGrid>,
        what: &str,
        key: &str,
    ) -> Result<&'g DayGrid, StageError> {
        map.get(key)
            .ok_or_else(|| StageError::Data(format!("no {what} for {key}")))
    }

    fn hours(
        &self,
        g: &DayGrid,
        what: &str,
        first: i64,
        last: i64,
    ) -> Result<Vec<f64>, StageError> {
        g.hours(first, last).ok_or_else(|| {
            StageError::Data(format!(
                "{what} does not cover {} ..= {}",
                self.ds.date(first),
                self.ds.date(last)
            ))
        })
    }

    fn day(&self, g: &DayGrid, what: &str, day: i64) -> Result<[f64; 24], StageError> {
        g.day(day)
            .copied()
            .ok_or_else(|| StageError::Data(format!("{what} missing on {}", self.ds.date(day))))
    }

    fn series(&self, first_day: i64, values: Vec<f64>) -> Result<HourlySeries, StageError> {
        Ok(HourlySeries::from_days(first_day, values, &self.calendar)?)
    }

    fn tso_series(&self, first: i64, last: i64) -> Result<HourlySeries, StageError> {
        let g = self.grid(&self.ds.load_tso, "TSO load forecast", self.focal())?;
        let v = self.hours(g, "TSO load forecast", first, last)?;
        self.series(first, v)
    }

    /// Days with data before `target` needed by the load stages.
    pub fn load_lookback(&self) -> i64 {
        let w = &self.cfg.windows;
        1 + w.load_days as i64 + 2 + w.tso_history_days as i64
    }
}

fn sarma_to_array(p: &SarmaParams) -> [f64; 6] {
    [p.phi0, p.phi1, p.phi24, p.omega1, p.omega24, p.sigma2]
}

fn sarma_from_array(a: &[f64; 6]) -> SarmaParams {
    SarmaParams {
        phi0: a[0],
        phi1: a[1],
        phi24: a[2],
        omega1: a[3],
        omega24: a[4],
        sigma2: a[5],
    }
}

/// Improved load forecasts of the dispatch window, focal zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadStage {
    pub target_day: i64,
    /// TSO forecast plus forecast error for `D-1` and `D`.
    pub improved: [[f64; 24]; 2],
    /// Two-day-ahead forecast of the TSO forecast for `D+1`.
    pub two_day_ahead: [f64; 24],
    /// `[phi0, phi1, phi24, omega1, omega24, sigma2]`
    pub sarma: [f64; 6],
    pub sarma_converged: bool,
    /// SARMA part as above followed by `phi168`.
    pub sarmax: [f64; 7],
    pub sarmax_converged: bool,
}

impl LoadStage {
    pub fn sarmax_params(&self) -> SarmaxParams {
        let s: [f64; 6] = self.sarmax[..6].try_into().expect("six SARMA values");
        SarmaxParams {
            sarma: sarma_from_array(&s),
            phi168: self.sarmax[6],
        }
    }
}

pub fn preprocess(ctx: &Context, target: i64) -> Result<LoadStage, StageError> {
    let d = target - 1;
    let w = &ctx.cfg.windows;
    let l = w.load_days as i64;
    let actual_g = ctx.grid(&ctx.ds.load_actual, "actual load", ctx.focal())?;
    let (first, last) = (d - l, d - 1);
    let actual = ctx.hours(actual_g, "actual load", first, last)?;
    let tso = ctx.tso_series(first, d + 1)?;
    let errors: Vec<f64> = actual
        .iter()
        .zip(tso.values())
        .map(|(a, f)| a - f)
        .collect();
    let errors = ctx.series(first, errors)?;

    let profile = fit_seasonal_profile(&errors, WindowSpec::days(w.load_days))?;
    let seasonal = profile.component(&errors);
    let rc = errors.zip_with(&seasonal, |e, s| e - s)?;
    let sarma = fit_sarma(&rc)?;
    let eps_hat = forecast_error_ahead(&sarma.params, &profile, &errors, 48)?;
    let tso_ahead = tso.days(d, d + 1)?;
    let mut improved = [[0.0; 24]; 2];
    for (k, (f, e)) in tso_ahead.values().iter().zip(eps_hat.values()).enumerate() {
        improved[k / 24][k % 24] = f + e;
    }

    let sarmax = fit_sarmax_2da(&ctx.tso_series(d - l + 1, d)?)?;
    let hist = ctx.tso_series(d - w.tso_history_days as i64 + 1, d)?;
    let two = forecast_2da(&sarmax.params, &hist)?;
    let mut sx = [0.0; 7];
    sx[..6].copy_from_slice(&sarma_to_array(&sarmax.params.sarma));
    sx[6] = sarmax.params.phi168;
    Ok(LoadStage {
        target_day: target,
        improved,
        two_day_ahead: two.values().try_into().expect("one day"),
        sarma: sarma_to_array(&sarma.params),
        sarma_converged: sarma.report.converged,
        sarmax: sx,
        sarmax_converged: sarmax.report.converged,
    })
}

/// Load scenarios for the third window day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStage {
    pub target_day: i64,
    pub low: [f64; 24],
    pub expected: [f64; 24],
    pub high: [f64; 24],
    pub weights: [f64; 3],
    pub swapped_hours: Vec<usize>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
    pub dropped_columns: Vec<usize>,
}

/// Fits the 5 % and 95 % load quantiles on `[1, two-day-ahead forecast]`
/// over the `load_days` days before `D-1`, then builds the scenarios.
pub fn density(ctx: &Context, load: &LoadStage) -> Result<DensityStage, StageError> {
    let target = load.target_day;
    let d = target - 1;
    let w = &ctx.cfg.windows;
    let params = load.sarmax_params();
    let actual_g = ctx.grid(&ctx.ds.load_actual, "actual load", ctx.focal())?;
    let h = w.tso_history_days as i64;
    let mut x = Vec::with_capacity(w.load_days * 24);
    let mut y = Vec::with_capacity(w.load_days * 24);
    for t in d - w.load_days as i64..d {
        let origin = t - 2;
        let fc = forecast_2da(&params, &ctx.tso_series(origin - h + 1, origin)?)?;
        let act = ctx.day(actual_g, "actual load", t)?;
        for (f, a) in fc.values().iter().zip(act) {
            x.push(vec![1.0, *f]);
            y.push(a);
        }
    }
    let q05 = fit_quantile_regression(&x, &y, 0.05)?;
    let q95 = fit_quantile_regression(&x, &y, 0.95)?;
    let mut dropped_columns = q05.dropped.clone();
    dropped_columns.extend(&q95.dropped);
    let point = ctx.series(target + 1, load.two_day_ahead.to_vec())?;
    let set = build_scenarios(&point, &q05.model, &q95.model, ctx.cfg.weights())?;
    let arr = |s: &HourlySeries| -> [f64; 24] { s.values().try_into().expect("one day") };
    Ok(DensityStage {
        target_day: target,
        low: arr(&set.low),
        expected: arr(&set.expected),
        high: arr(&set.high),
        weights: ctx.cfg.scenario_weights,
        swapped_hours: set.swapped_hours,
        q05: q05.model.beta,
        q95: q95.model.beta,
        dropped_columns,
    })
}

/// Focal-zone demand of a dispatch window: `D-1` and `D` are shared, `D+1`
/// has one row per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalDemand {
    pub shared: [[f64; 24]; 2],
    pub third: Vec<[f64; 24]>,
    pub probabilities: Vec<f64>,
}

impl FocalDemand {
    pub fn from_stages(load: &LoadStage, density: &DensityStage) -> Self {
        FocalDemand {
            shared: load.improved,
            third: vec![density.low, density.expected, density.high],
            probabilities: density.weights.to_vec(),
        }
    }

    /// Raw TSO forecast, with the third day copied from a week earlier.
    pub fn raw_tso(ctx: &Context, target: i64) -> Result<Self, StageError> {
        let g = ctx.grid(&ctx.ds.load_tso, "TSO load forecast", ctx.focal())?;
        Ok(FocalDemand {
            shared: [
                ctx.day(g, "TSO load forecast", target - 1)?,
                ctx.day(g, "TSO load forecast", target)?,
            ],
            third: vec![ctx.day(g, "TSO load forecast", target + 1 - 7)?],
            probabilities: vec![1.0],
        })
    }
}

/// Per-hour values of `day`'s step list, forward-filled from the latest
/// earlier day.
fn value_steps(ctx: &Context, c: &ClusterSpec, first: i64) -> Result<Vec<ValueStep>, StageError> {
    let table = ctx
        .ds
        .water_values
        .get(&c.id)
        .ok_or_else(|| StageError::Data(format!("cluster {}: no water values", c.id)))?;
    let on = |day: i64| -> Result<&Vec<(f64, f64)>, StageError> {
        table
            .range(..=day)
            .next_back()
            .map(|(_, v)| v)
            .ok_or_else(|| {
                StageError::Data(format!(
                    "cluster {}: no water values on or before {}",
                    c.id,
                    ctx.ds.date(day)
                ))
            })
    };
    let reference = on(first + 1)?;
    let mut steps = Vec::with_capacity(reference.len());
    for (k, &(capacity, _)) in reference.iter().enumerate() {
        let mut water_value = Vec::with_capacity(HORIZON);
        for day in first..first + 3 {
            let s = on(day)?;
            let v = s.get(k).or(s.last()).map_or(0.0, |x| x.1);
            water_value.extend([v; 24]);
        }
        steps.push(ValueStep {
            capacity,
            water_value,
        });
    }
    Ok(steps)
}

fn window_cluster(
    ctx: &Context,
    c: &ClusterSpec,
    first: i64,
    target: i64,
) -> Result<TechnologyCluster, StageError> {
    let ds = ctx.ds;
    let zone = ds
        .zone_index(&c.zone)
        .ok_or_else(|| StageError::Data(format!("cluster {}: unknown zone {}", c.id, c.zone)))?;
    let outage = match ds.outages.get(&c.id) {
        Some(g) => (first..first + 3)
            .flat_map(|d| g.day(d).copied().unwrap_or([0.0; 24]))
            .map(|o| o.clamp(0.0, c.cap_mw))
            .collect(),
        None => vec![0.0; HORIZON],
    };
    let kind = match c.kind {
        ClusterKindTag::Thermal => {
            let (vc_full, vc_minload) = ds.variable_costs(c, target).map_err(StageError::Data)?;
            ClusterKind::Thermal(ThermalParams {
                vc_full,
                vc_minload,
                g_min: c.g_min,
                startup_cost: c.startup_cost,
                outage: outage.clone(),
            })
        }
        ClusterKindTag::Renewable => {
            let g = ctx.grid(&ds.res_profile, "feed-in profile", &c.id)?;
            ClusterKind::Renewable {
                profile: ctx.hours(g, &format!("feed-in profile of {}", c.id), first, first + 2)?,
            }
        }
        ClusterKindTag::StorageMid => ClusterKind::StorageMid {
            efficiency: c.storage_efficiency.unwrap_or(1.0),
            cer: c.cer.unwrap_or(1.0),
        },
        ClusterKindTag::StorageLong => ClusterKind::StorageLong {
            steps: value_steps(ctx, c, first)?,
        },
        ClusterKindTag::HydroReservoir => ClusterKind::HydroReservoir {
            steps: value_steps(ctx, c, first)?,
        },
        ClusterKindTag::Baseload => ClusterKind::Baseload,
    };
    let mut tc = TechnologyCluster::new(c.id.clone(), zone, c.cap_mw, kind);
    tc.availability = vec![c.availability; HORIZON];
    if c.kind != ClusterKindTag::Thermal {
        for (cap, o) in tc.cap.iter_mut().zip(&outage) {
            *cap -= o;
        }
    }
    Ok(tc)
}

/// Assembles the window LP inputs for `target`. Other zones see the actual
/// load of the same hours a week earlier.
pub fn dispatch_instance(
    ctx: &Context,
    target: i64,
    focal: &FocalDemand,
    initial_online: Option<&[f64]>,
) -> Result<DispatchInstance, StageError> {
    let ds = ctx.ds;
    let cfg = ctx.cfg;
    let first = target - 1;
    let mut zones = Vec::with_capacity(ds.zones.len());
    for name in &ds.zones {
        let demand = if name == ctx.focal() {
            focal
                .third
                .iter()
                .map(|third| {
                    focal
                        .shared
                        .iter()
                        .chain(std::iter::once(third))
                        .flatten()
                        .copied()
                        .collect()
                })
                .collect()
        } else {
            let g = ctx.grid(&ds.load_actual, "actual load", name)?;
            vec![ctx.hours(g, &format!("actual load of {name}"), first - 7, first - 5)?]
        };
        let chp = match ds.chp.get(name) {
            Some(g) => ctx.hours(g, &format!("CHP must-run of {name}"), first, first + 2)?,
            None => vec![0.0; HORIZON],
        };
        let reserves = ds
            .reserves
            .get(name)
            .and_then(|m| m.range(..=target).next_back())
            .map(|(_, r)| *r)
            .unwrap_or_default();
        let mut z = ZoneData::new(name.clone(), Vec::new());
        z.demand = demand;
        z.chp_mustrun = chp;
        z.reserve_primary = reserves.primary;
        z.reserve_sec_pos = reserves.secondary_pos;
        z.reserve_sec_neg = reserves.secondary_neg;
        z.voll = cfg.voll;
        z.curtc = cfg.curtc;
        zones.push(z);
    }
    let clusters = ds
        .clusters
        .iter()
        .map(|c| window_cluster(ctx, c, first, target))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ntc = NtcMatrix::default();
    for ((a, b), g) in &ds.ntc {
        let (Some(ia), Some(ib)) = (ds.zone_index(a), ds.zone_index(b)) else {
            continue;
        };
        ntc.set(
            ia,
            ib,
            ctx.hours(g, &format!("NTC {a}->{b}"), first, first + 2)?,
        );
    }
    let mut inst = DispatchInstance::new(first, zones, clusters);
    inst.probabilities = focal.probabilities.clone();
    inst.ntc = ntc;
    inst.indexing = cfg.scenario_indexing.into();
    inst.initial_online = initial_online.map(<[f64]>::to_vec);
    Ok(inst)
}

/// Target-day prices of every zone with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchStage {
    pub target_day: i64,
    pub zones: Vec<String>,
    pub prices: Vec<[f64; 24]>,
    pub initial_online: Option<Vec<f64>>,
    pub terminal_online: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub degenerate: bool,
    pub dual_degenerate: bool,
    pub shed_mwh: f64,
    pub curtailed_mwh: f64,
}

impl DispatchStage {
    pub fn zone_prices(&self, zone: &str) -> Option<&[f64; 24]> {
        self.zones
            .iter()
            .position(|z| z == zone)
            .map(|i| &self.prices[i])
    }
}

pub fn focal_demand(
    ctx: &Context,
    target: i64,
    stages: Option<(&LoadStage, &DensityStage)>,
) -> Result<FocalDemand, StageError> {
    match (ctx.cfg.mode, stages) {
        (Mode::DispatchOnly, _) => FocalDemand::raw_tso(ctx, target),
        (Mode::Full, Some((l, d))) => Ok(FocalDemand::from_stages(l, d)),
        (Mode::Full, None) => Err(StageError::Data("load scenarios unavailable".into())),
    }
}

pub fn dispatch(
    ctx: &Context,
    target: i64,
    focal: &FocalDemand,
    initial_online: Option<&[f64]>,
) -> Result<DispatchStage, StageError> {
    let inst = dispatch_instance(ctx, target, focal, initial_online)?;
    let r = solve_instance(&inst, &ctx.cfg.solver_options())?;
    let row = |v: &Vec<f64>| -> [f64; 24] { v[..24].try_into().expect("24 hours") };
    Ok(DispatchStage {
        target_day: target,
        zones: ctx.ds.zones.clone(),
        prices: r.prices.iter().map(row).collect(),
        initial_online: inst.initial_online.clone(),
        terminal_online: r.terminal_online,
        objective: r.diagnostics.objective,
        iterations: r.diagnostics.iterations,
        degenerate: r.diagnostics.degenerate,
        dual_degenerate: r.diagnostics.dual_degenerate,
        shed_mwh: r.shed.iter().flatten().sum(),
        curtailed_mwh: r.curtailment.iter().flatten().sum(),
    })
}

/// First dispatch day whose errors enter the price-error models.
pub fn panel_lookback(cfg: &PipelineConfig) -> i64 {
    let weeks = cfg
        .windows
        .postproc_weeks
        .iter()
        .copied()
        .max()
        .unwrap_or(0) as i64;
    cfg.windows.qra_days as i64 + 7 * weeks + 7
}

/// Builds the error panel from `first` up to the day before `day`, with
/// exogenous inputs through `day`. Days without a dispatch price count as
/// zero error; their number is returned.
pub fn price_error_panel(
    ctx: &Context,
    first: i64,
    day: i64,
    dispatch: &dyn Fn(i64) -> Option<[f64; 24]>,
) -> Result<(PriceErrorPanel, usize), StageError> {
    let ds = ctx.ds;
    let prices = ctx.grid(&ds.prices, "actual prices", ctx.focal())?;
    let wind = ctx.grid(&ds.wind, "wind forecast", ctx.focal())?;
    let mut eps = Vec::new();
    let mut filled = 0;
    for t in first..day {
        let actual = ctx.day(prices, "actual price", t)?;
        match dispatch(t) {
            Some(p) => eps.push(std::array::from_fn(|h| actual[h] - p[h])),
            None => {
                filled += 1;
                eps.push([0.0; 24]);
            }
        }
    }
    let mut holiday = Vec::new();
    let mut wind_gw = Vec::new();
    for t in first..=day {
        holiday.push(ctx.calendar.flags(t).is_holiday);
        wind_gw.push(ctx.day(wind, "wind forecast", t)?.map(|w| w * WIND_SCALE));
    }
    Ok((PriceErrorPanel::new(first, eps, holiday, wind_gw)?, filled))
}

/// Six price forecasts for one day: dispatch price plus each sub-model's
/// error forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubModelStage {
    pub day: i64,
    pub base: [f64; 24],
    pub names: Vec<String>,
    pub prices: Vec<[f64; 24]>,
    pub uv_converged: Vec<bool>,
    pub zero_filled_days: usize,
}

impl SubModelStage {
    pub fn forecasts(&self) -> SubModelForecasts {
        SubModelForecasts {
            day: self.day,
            prices: std::array::from_fn(|i| self.prices.get(i).copied()),
        }
    }
}

pub fn sub_models(
    ctx: &Context,
    day: i64,
    panel_first: i64,
    dispatch: &dyn Fn(i64) -> Option<[f64; 24]>,
) -> Result<SubModelStage, StageError> {
    let base = dispatch(day)
        .ok_or_else(|| StageError::Data(format!("no dispatch price for {}", ctx.ds.date(day))))?;
    let (panel, zero_filled_days) = price_error_panel(ctx, panel_first, day, dispatch)?;
    let weeks = &ctx.cfg.windows.postproc_weeks;
    let mut names = Vec::with_capacity(6);
    let mut errors = Vec::with_capacity(6);
    let mut uv_converged = Vec::with_capacity(3);
    for &w in weeks {
        let fit = fit_uv(&panel, day, w, None)?;
        uv_converged.push(fit.converged);
        errors.push(forecast_uv(&fit.params, &panel, day)?);
        names.push(format!("uv{w}"));
    }
    for &w in weeks {
        let params = fit_mv(&panel, day, w)?;
        errors.push(forecast_mv(&params, &panel, day)?);
        names.push(format!("mv{w}"));
    }
    let prices = errors
        .iter()
        .map(|e| std::array::from_fn(|h| base[h] + e[h]))
        .collect();
    Ok(SubModelStage {
        day,
        base,
        names,
        prices,
        uv_converged,
        zero_filled_days,
    })
}

/// Point and probabilistic price forecast of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastStage {
    pub day: i64,
    pub dispatch: [f64; 24],
    pub point: [f64; 24],
    pub quantiles: Vec<[f64; 19]>,
    pub peak: [bool; 24],
    pub neg_prob: [f64; 24],
    pub rearranged_hours: Vec<usize>,
    pub training_days: usize,
    pub degenerate_fits: usize,
}

impl ForecastStage {
    pub fn probabilistic(&self) -> epf_core::postproc::ProbabilisticForecast {
        epf_core::postproc::ProbabilisticForecast {
            day: self.day,
            point: self.point,
            quantiles: self.quantiles.clone(),
            peak: self.peak,
            rearranged: self.rearranged_hours.clone(),
        }
    }
}

pub fn peak_hours(ctx: &Context, day: i64) -> [bool; 24] {
    let flags = ctx.calendar.flags(day);
    std::array::from_fn(|h| is_peak(h as u8 + 1, flags))
}

/// Quantile regression averaging over the sub-model forecasts of the
/// `qra_days` days before `day`; missing days are skipped.
pub fn forecast(
    ctx: &Context,
    today: &SubModelStage,
    history: &dyn Fn(i64) -> Option<SubModelStage>,
) -> Result<ForecastStage, StageError> {
    let day = today.day;
    let prices = ctx.grid(&ctx.ds.prices, "actual prices", ctx.focal())?;
    let mut rows = Vec::new();
    let mut training_days = 0;
    for t in day - ctx.cfg.windows.qra_days as i64..day {
        let Some(s) = history(t) else { continue };
        let actual = ctx.day(prices, "actual price", t)?;
        let six = s.forecasts();
        let peak = peak_hours(ctx, t);
        for h in 0..24 {
            rows.push(QraRow {
                regressors: six.regressors(h)?,
                actual: actual[h],
                segment: if peak[h] {
                    Segment::Peak
                } else {
                    Segment::OffPeak
                },
            });
        }
        training_days += 1;
    }
    let models = fit_qra_grid(&rows)?;
    let f = predict_probabilistic(&models, &today.forecasts(), peak_hours(ctx, day))?;
    Ok(ForecastStage {
        day,
        dispatch: today.base,
        point: f.point,
        neg_prob: std::array::from_fn(|h| negative_price_probability(&f, h)),
        quantiles: f.quantiles,
        peak: f.peak,
        rearranged_hours: f.rearranged,
        training_days,
        degenerate_fits: models.degenerate_fits,
    })
}
