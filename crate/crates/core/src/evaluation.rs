//! Forecast scoring: error metrics, pinball loss, calibration counts,
//! slice reports and the Diebold-Mariano comparison.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::postproc::{negative_price_probability, ProbabilisticForecast, QUANTILE_GRID};
use crate::timeseries::{hour_of_week, is_peak, CalendarFlags, HourStamp};

/// Bins of the coverage histogram: below the first quantile, between each
/// adjacent pair, above the last.
pub const COVERAGE_BINS: usize = QUANTILE_GRID.len() + 1;

/// Hour-of-week slots including the 24 holiday slots.
pub const WEEK_SLOTS: usize = 192;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("series lengths differ: {0} vs {1}")]
    Alignment(usize, usize),
    #[error("need at least {needed} common days, got {got}")]
    TooFewDays { needed: usize, got: usize },
}

fn aligned(a: usize, b: usize) -> Result<(), EvalError> {
    if a == b {
        Ok(())
    } else {
        Err(EvalError::Alignment(a, b))
    }
}

/// Root mean squared error; 0 for empty input.
pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    aligned(actual.len(), forecast.len())?;
    if actual.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f) * (a - f))
        .sum();
    Ok((ss / actual.len() as f64).sqrt())
}

/// Mean absolute error; 0 for empty input.
pub fn mae(actual: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    aligned(actual.len(), forecast.len())?;
    if actual.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f).abs())
        .sum();
    Ok(s / actual.len() as f64)
}

/// Mean pinball loss per quantile level.
pub fn pinball<const K: usize>(
    actual: &[f64],
    quantiles: &[[f64; K]],
    grid: &[f64; K],
) -> Result<[f64; K], EvalError> {
    aligned(actual.len(), quantiles.len())?;
    let mut out = [0.0; K];
    if actual.is_empty() {
        return Ok(out);
    }
    for (y, qs) in actual.iter().zip(quantiles) {
        for k in 0..K {
            out[k] += crate::density::pinball_loss(grid[k], y - qs[k]);
        }
    }
    let n = actual.len() as f64;
    Ok(out.map(|v| v / n))
}

/// Bin of `actual` among sorted predicted quantiles: the number of quantiles
/// strictly below it.
pub fn coverage_bin(actual: f64, quantiles: &[f64]) -> usize {
    quantiles.partition_point(|&q| q < actual)
}

/// Counts of actuals per bin between adjacent predicted quantiles.
pub fn coverage_histogram<'a>(
    pairs: impl IntoIterator<Item = (f64, &'a [f64; 19])>,
) -> [usize; COVERAGE_BINS] {
    let mut counts = [0; COVERAGE_BINS];
    for (y, q) in pairs {
        counts[coverage_bin(y, q)] += 1;
    }
    counts
}

/// Pearson chi-square test of equal bin probabilities; returns the
/// statistic and its upper-tail p-value.
pub fn chi_square_uniform(counts: &[usize]) -> (f64, f64) {
    let n: usize = counts.iter().sum();
    if n == 0 || counts.len() < 2 {
        return (0.0, 1.0);
    }
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}

/// One-sample Kolmogorov-Smirnov test against U(0, 1), with the
/// asymptotic distribution and Stephens' small-sample correction.
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / nf - x).max(x - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    (d, kolmogorov_tail(lambda))
}

/// P(K > lambda) for the Kolmogorov distribution.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DmNorm {
    /// Daily mean absolute error.
    #[default]
    L1,
    /// Daily mean squared error.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmResult {
    pub statistic: f64,
    /// One-sided: small values favour forecast `b`.
    pub p_value: f64,
    pub days: usize,
    /// The loss differential was constant; statistic is 0 and p is 1.
    pub zero_variance: bool,
}

pub const DM_MIN_DAYS: usize = 30;

/// Multivariate Diebold-Mariano test on daily error vectors, in the
/// epftoolbox form: the daily loss is the mean absolute (L1) or mean squared
/// (L2) error over the 24 hours, and the test is one-sided with the
/// alternative that `b` is more accurate.
pub fn dm_test(
    errors_a: &[[f64; 24]],
    errors_b: &[[f64; 24]],
    norm: DmNorm,
) -> Result<DmResult, EvalError> {
    aligned(errors_a.len(), errors_b.len())?;
    let n = errors_a.len();
    if n < DM_MIN_DAYS {
        return Err(EvalError::TooFewDays {
            needed: DM_MIN_DAYS,
            got: n,
        });
    }
    let loss = |e: &[f64; 24]| -> f64 {
        let s: f64 = match norm {
            DmNorm::L1 => e.iter().map(|v| v.abs()).sum(),
            DmNorm::L2 => e.iter().map(|v| v * v).sum(),
        };
        s / 24.0
    };
    let delta: Vec<f64> = errors_a
        .iter()
        .zip(errors_b)
        .map(|(a, b)| loss(a) - loss(b))
        .collect();
    let nf = n as f64;
    let mean = delta.iter().sum::<f64>() / nf;
    let var = delta.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / nf;
    if var <= 1e-28 * (1.0 + mean * mean) {
        return Ok(DmResult {
            statistic: 0.0,
            p_value: 1.0,
            days: n,
            zero_variance: true,
        });
    }
    let statistic = mean / (var / nf).sqrt();
    let normal = Normal::standard();
    Ok(DmResult {
        statistic,
        p_value: normal.sf(statistic),
        days: n,
        zero_variance: false,
    })
}

/// One evaluated day.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalDay {
    pub day: i64,
    pub year: i32,
    pub flags: CalendarFlags,
    pub actual: [f64; 24],
    pub point: [f64; 24],
    pub probabilistic: Option<ProbabilisticForecast>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub rmse: f64,
    pub mae: f64,
    pub hours: usize,
}

#[derive(Debug, Default)]
struct ErrorAcc {
    ss: f64,
    sa: f64,
    n: usize,
}

impl ErrorAcc {
    fn push(&mut self, e: f64) {
        self.ss += e * e;
        self.sa += e.abs();
        self.n += 1;
    }

    fn stats(&self) -> ErrorStats {
        if self.n == 0 {
            return ErrorStats::default();
        }
        let n = self.n as f64;
        ErrorStats {
            rmse: (self.ss / n).sqrt(),
            mae: self.sa / n,
            hours: self.n,
        }
    }
}

/// Five-number summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Spread {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

impl Spread {
    fn of(mut v: Vec<f64>) -> Spread {
        if v.is_empty() {
            return Spread::default();
        }
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        };
        Spread {
            min: v[0],
            q25: at(0.25),
            median: at(0.5),
            q75: at(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticReport {
    pub hours: usize,
    pub pinball: [f64; 19],
    pub coverage: [usize; COVERAGE_BINS],
    pub coverage_peak: [usize; COVERAGE_BINS],
    pub coverage_off_peak: [usize; COVERAGE_BINS],
    /// Share of actuals inside [q05, q95].
    pub interval_hit_rate: f64,
    /// Width q95 - q05 per hour of day.
    pub width_by_hour: Vec<Spread>,
    /// Mean width per hour-of-week slot; `None` where no hour fell.
    pub width_by_week_slot: Vec<Option<f64>>,
    pub neg_prob_by_week_slot: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall: ErrorStats,
    pub per_year: BTreeMap<i32, ErrorStats>,
    pub peak: ErrorStats,
    pub off_peak: ErrorStats,
    /// Groups of hours by the actual price, lowest 20 % first.
    pub price_groups: [ErrorStats; 5],
    /// Highest actual price in each of the lower four groups.
    pub group_bounds: [f64; 4],
    pub probabilistic: Option<ProbabilisticReport>,
}

/// Assembles every slice of the report. Probabilistic parts cover the days
/// that carry a probabilistic forecast.
pub fn slice_report(days: &[EvalDay]) -> EvalReport {
    let mut overall = ErrorAcc::default();
    let mut per_year: BTreeMap<i32, ErrorAcc> = BTreeMap::new();
    let mut peak = ErrorAcc::default();
    let mut off_peak = ErrorAcc::default();
    let mut hours: Vec<(f64, f64)> = Vec::with_capacity(days.len() * 24);
    for d in days {
        for h in 0..24 {
            let e = d.actual[h] - d.point[h];
            overall.push(e);
            per_year.entry(d.year).or_default().push(e);
            if is_peak(h as u8 + 1, d.flags) {
                peak.push(e);
            } else {
                off_peak.push(e);
            }
            hours.push((d.actual[h], e));
        }
    }

    // rank partition: disjoint, exhaustive, sizes within one of N/5
    hours.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = hours.len();
    let mut groups: [ErrorAcc; 5] = Default::default();
    let mut group_bounds = [f64::NAN; 4];
    for (rank, &(price, e)) in hours.iter().enumerate() {
        let g = rank * 5 / n;
        groups[g].push(e);
        if g < 4 {
            group_bounds[g] = price;
        }
    }

    EvalReport {
        overall: overall.stats(),
        per_year: per_year.iter().map(|(y, a)| (*y, a.stats())).collect(),
        peak: peak.stats(),
        off_peak: off_peak.stats(),
        price_groups: std::array::from_fn(|g| groups[g].stats()),
        group_bounds,
        probabilistic: probabilistic_report(days),
    }
}

fn probabilistic_report(days: &[EvalDay]) -> Option<ProbabilisticReport> {
    let with: Vec<(&EvalDay, &ProbabilisticForecast)> = days
        .iter()
        .filter_map(|d| d.probabilistic.as_ref().map(|f| (d, f)))
        .collect();
    if with.is_empty() {
        return None;
    }
    let mut actual = Vec::new();
    let mut quantiles = Vec::new();
    let mut coverage = [0; COVERAGE_BINS];
    let mut coverage_peak = [0; COVERAGE_BINS];
    let mut coverage_off_peak = [0; COVERAGE_BINS];
    let mut hits = 0usize;
    let mut widths: Vec<Vec<f64>> = vec![Vec::new(); 24];
    let mut slot_width = vec![(0.0, 0usize); WEEK_SLOTS];
    let mut slot_neg = vec![0.0; WEEK_SLOTS];
    for (d, f) in &with {
        for h in 0..24 {
            let q = &f.quantiles[h];
            let y = d.actual[h];
            actual.push(y);
            quantiles.push(*q);
            let bin = coverage_bin(y, q);
            coverage[bin] += 1;
            if is_peak(h as u8 + 1, d.flags) {
                coverage_peak[bin] += 1;
            } else {
                coverage_off_peak[bin] += 1;
            }
            hits += usize::from(y >= q[0] && y <= q[18]);
            let width = q[18] - q[0];
            widths[h].push(width);
            let stamp = HourStamp {
                day: d.day,
                hour: h as u8 + 1,
            };
            let slot = usize::from(hour_of_week(stamp, d.flags)) - 1;
            slot_width[slot].0 += width;
            slot_width[slot].1 += 1;
            slot_neg[slot] += negative_price_probability(f, h);
        }
    }
    let mean_or_none = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);
    Some(ProbabilisticReport {
        hours: actual.len(),
        pinball: pinball(&actual, &quantiles, &QUANTILE_GRID).expect("aligned by construction"),
        coverage,
        coverage_peak,
        coverage_off_peak,
        interval_hit_rate: hits as f64 / actual.len() as f64,
        width_by_hour: widths.into_iter().map(Spread::of).collect(),
        width_by_week_slot: slot_width
            .iter()
            .map(|&(s, n)| mean_or_none(s, n))
            .collect(),
        neg_prob_by_week_slot: slot_width
            .iter()
            .zip(&slot_neg)
            .map(|(&(_, n), &p)| mean_or_none(p, n))
            .collect(),
    })
}
