//! Evaluation over the forecast range: error tables, calibration, the
//! Diebold-Mariano comparison of the dispatch price with the post-processed
//! forecast, and a JSON summary.

use chrono::Datelike;
use epf_core::evaluation::{
    chi_square_uniform, dm_test, slice_report, ErrorStats, EvalDay, EvalReport, COVERAGE_BINS,
    DM_MIN_DAYS,
};
use epf_core::postproc::QUANTILE_GRID;
use serde::{Deserialize, Serialize};

use crate::stages::{Context, ForecastStage};
use crate::store::{Store, StoreError};

pub const SUMMARY: &str = "evaluation/summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub days_evaluated: usize,
    pub hours: usize,
    pub rmse_dispatch: f64,
    pub mae_dispatch: f64,
    pub rmse_forecast: f64,
    pub mae_forecast: f64,
    /// Relative RMSE reduction of the forecast over the dispatch price.
    pub rmse_improvement: f64,
    pub mae_improvement: f64,
    pub coverage_chi_square: Option<f64>,
    pub coverage_p_value: Option<f64>,
    /// Share of hours inside the 5 % to 95 % interval.
    pub interval_hit_rate: Option<f64>,
    pub dm_statistic: Option<f64>,
    /// Small values favour the post-processed forecast.
    pub dm_p_value: Option<f64>,
    pub dm_norm: String,
}

pub struct Evaluation {
    pub summary: Summary,
    pub forecast: EvalReport,
    pub dispatch: EvalReport,
    pub files: Vec<String>,
}

fn stats_rows(model: &str, r: &EvalReport) -> Vec<Vec<String>> {
    let row = |slice: String, s: &ErrorStats| {
        vec![
            model.to_string(),
            slice,
            s.rmse.to_string(),
            s.mae.to_string(),
            s.hours.to_string(),
        ]
    };
    let mut rows = vec![row("all".into(), &r.overall)];
    rows.extend(r.per_year.iter().map(|(y, s)| row(format!("year_{y}"), s)));
    rows.push(row("peak".into(), &r.peak));
    rows.push(row("off_peak".into(), &r.off_peak));
    rows.extend(
        r.price_groups
            .iter()
            .enumerate()
            .map(|(g, s)| row(format!("price_group_{}", g + 1), s)),
    );
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Evaluates the days whose forecast and actual price are both available.
pub fn evaluate(
    ctx: &Context,
    store: &Store,
    forecasts: &[ForecastStage],
) -> Result<Evaluation, StoreError> {
    let prices = ctx.ds.prices.get(&ctx.cfg.focal_zone);
    let mut star = Vec::new();
    let mut disp = Vec::new();
    for f in forecasts {
        let Some(actual) = prices.and_then(|g| g.day(f.day)) else {
            continue;
        };
        let base = EvalDay {
            day: f.day,
            year: ctx.ds.date(f.day).year(),
            flags: ctx.calendar.flags(f.day),
            actual: *actual,
            point: f.point,
            probabilistic: Some(f.probabilistic()),
        };
        disp.push(EvalDay {
            point: f.dispatch,
            probabilistic: None,
            ..base.clone()
        });
        star.push(base);
    }
    let forecast = slice_report(&star);
    let dispatch = slice_report(&disp);

    let errors = |days: &[EvalDay]| -> Vec<[f64; 24]> {
        days.iter()
            .map(|d| std::array::from_fn(|h| d.actual[h] - d.point[h]))
            .collect()
    };
    let norm = ctx.cfg.dm_norm;
    let dm = (star.len() >= DM_MIN_DAYS)
        .then(|| dm_test(&errors(&disp), &errors(&star), norm.into()).ok())
        .flatten();
    let coverage = forecast
        .probabilistic
        .as_ref()
        .map(|p| chi_square_uniform(&p.coverage));
    let rel = |a: f64, b: f64| if a > 0.0 { (a - b) / a } else { 0.0 };
    let summary = Summary {
        days_evaluated: star.len(),
        hours: forecast.overall.hours,
        rmse_dispatch: dispatch.overall.rmse,
        mae_dispatch: dispatch.overall.mae,
        rmse_forecast: forecast.overall.rmse,
        mae_forecast: forecast.overall.mae,
        rmse_improvement: rel(dispatch.overall.rmse, forecast.overall.rmse),
        mae_improvement: rel(dispatch.overall.mae, forecast.overall.mae),
        coverage_chi_square: coverage.map(|c| c.0),
        coverage_p_value: coverage.map(|c| c.1),
        interval_hit_rate: forecast.probabilistic.as_ref().map(|p| p.interval_hit_rate),
        dm_statistic: dm.map(|d| d.statistic),
        dm_p_value: dm.map(|d| d.p_value),
        dm_norm: format!("{norm:?}").to_lowercase(),
    };

    let mut files = Vec::new();
    let mut put = |rel: &str, cols: &[&str], rows: Vec<Vec<String>>| -> Result<(), StoreError> {
        store.write_csv(rel, &header(cols), &rows)?;
        files.push(rel.to_string());
        Ok(())
    };
    let mut point_rows = stats_rows("dispatch", &dispatch);
    point_rows.extend(stats_rows("forecast", &forecast));
    put(
        "evaluation/point_metrics.csv",
        &["model", "slice", "rmse", "mae", "hours"],
        point_rows,
    )?;
    put(
        "evaluation/daily_errors.csv",
        &[
            "date",
            "rmse_dispatch",
            "rmse_forecast",
            "mae_dispatch",
            "mae_forecast",
        ],
        star.iter()
            .zip(&disp)
            .map(|(s, d)| {
                let r = |e: &EvalDay| {
                    epf_core::evaluation::rmse(&e.actual, &e.point).unwrap_or(f64::NAN)
                };
                let m = |e: &EvalDay| {
                    epf_core::evaluation::mae(&e.actual, &e.point).unwrap_or(f64::NAN)
                };
                vec![
                    ctx.ds.date(s.day).to_string(),
                    r(d).to_string(),
                    r(s).to_string(),
                    m(d).to_string(),
                    m(s).to_string(),
                ]
            })
            .collect(),
    )?;
    if let Some(p) = &forecast.probabilistic {
        put(
            "evaluation/coverage.csv",
            &["bin", "all", "peak", "off_peak"],
            (0..COVERAGE_BINS)
                .map(|b| {
                    vec![
                        (b + 1).to_string(),
                        p.coverage[b].to_string(),
                        p.coverage_peak[b].to_string(),
                        p.coverage_off_peak[b].to_string(),
                    ]
                })
                .collect(),
        )?;
        put(
            "evaluation/pinball.csv",
            &["quantile", "pinball"],
            QUANTILE_GRID
                .iter()
                .zip(&p.pinball)
                .map(|(q, l)| vec![q.to_string(), l.to_string()])
                .collect(),
        )?;
        put(
            "evaluation/interval_width_by_hour.csv",
            &["hour", "min", "q25", "median", "q75", "max", "mean"],
            p.width_by_hour
                .iter()
                .enumerate()
                .map(|(h, s)| {
                    [s.min, s.q25, s.median, s.q75, s.max, s.mean].iter().fold(
                        vec![(h + 1).to_string()],
                        |mut r, v| {
                            r.push(v.to_string());
                            r
                        },
                    )
                })
                .collect(),
        )?;
        put(
            "evaluation/week_slots.csv",
            &[
                "slot",
                "mean_interval_width",
                "mean_negative_price_probability",
            ],
            p.width_by_week_slot
                .iter()
                .zip(&p.neg_prob_by_week_slot)
                .enumerate()
                .map(|(k, (w, n))| vec![(k + 1).to_string(), opt(*w), opt(*n)])
                .collect(),
        )?;
    }
    store.write_json(SUMMARY, &summary)?;
    files.push(SUMMARY.to_string());
    Ok(Evaluation {
        summary,
        forecast,
        dispatch,
        files,
    })
}
