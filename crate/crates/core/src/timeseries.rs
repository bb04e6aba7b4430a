//! Hourly series, calendar flags and window bookkeeping.
//!
//! Time is counted in whole days since a dataset epoch plus an hour of day in
//! `1..=24`. Every day has exactly 24 hours.

use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("hour {0} outside 1..=24")]
    InvalidHour(u8),
    #[error("requested range {from:?}..={to:?} is outside the series")]
    OutOfRange { from: HourStamp, to: HourStamp },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("series are not aligned")]
    Alignment,
    #[error("calendar does not cover days {first}..={last}")]
    CalendarCoverage { first: i64, last: i64 },
    #[error("weekday sequence is not cyclic at day {0}")]
    WeekdayOrder(i64),
}

/// An hour of a given day. Ordering is by day, then hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HourStamp {
    pub day: i64,
    pub hour: u8,
}

impl HourStamp {
    pub fn new(day: i64, hour: u8) -> Result<Self, SeriesError> {
        if !(1..=24).contains(&hour) {
            return Err(SeriesError::InvalidHour(hour));
        }
        Ok(HourStamp { day, hour })
    }

    /// Absolute hour count since the epoch.
    pub fn index(self) -> i64 {
        self.day * 24 + i64::from(self.hour) - 1
    }

    pub fn from_index(i: i64) -> Self {
        HourStamp {
            day: i.div_euclid(24),
            hour: (i.rem_euclid(24) + 1) as u8,
        }
    }

    pub fn add_hours(self, n: i64) -> Self {
        Self::from_index(self.index() + n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CalendarFlags {
    /// 1 = Monday .. 7 = Sunday.
    pub weekday: u8,
    pub is_holiday: bool,
}

/// Weekday of `day` given the weekday of day 0.
pub fn weekday_of(day: i64, epoch_weekday: u8) -> u8 {
    ((i64::from(epoch_weekday) - 1 + day).rem_euclid(7) + 1) as u8
}

/// Dataset calendar: weekday of the epoch and the set of holiday days.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Calendar {
    pub epoch_weekday: u8,
    pub holidays: BTreeSet<i64>,
}

impl Calendar {
    pub fn new(epoch_weekday: u8, holidays: impl IntoIterator<Item = i64>) -> Self {
        Calendar {
            epoch_weekday,
            holidays: holidays.into_iter().collect(),
        }
    }

    pub fn flags(&self, day: i64) -> CalendarFlags {
        CalendarFlags {
            weekday: weekday_of(day, self.epoch_weekday),
            is_holiday: self.holidays.contains(&day),
        }
    }

    pub fn days(&self, first: i64, last: i64) -> Vec<CalendarFlags> {
        (first..=last).map(|d| self.flags(d)).collect()
    }
}

/// Hour-of-week slot: Monday hour 1 is 1, Sunday hour 24 is 168, holiday
/// hours map to `168 + hour`.
pub fn hour_of_week(stamp: HourStamp, cal: CalendarFlags) -> u16 {
    if cal.is_holiday {
        168 + u16::from(stamp.hour)
    } else {
        (u16::from(cal.weekday) - 1) * 24 + u16::from(stamp.hour)
    }
}

/// Peak hours run from 08:00 to 20:00 (hours 9..=20) on weekdays.
pub fn is_peak(hour: u8, cal: CalendarFlags) -> bool {
    (9..=20).contains(&hour) && cal.weekday <= 5
}

/// Calibration window length and step, in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub length_days: usize,
    pub step_days: usize,
}

impl WindowSpec {
    pub fn days(length_days: usize) -> Self {
        WindowSpec {
            length_days: length_days.max(1),
            step_days: 1,
        }
    }

    pub fn weeks(weeks: usize) -> Self {
        Self::days(7 * weeks)
    }
}

/// Contiguous hourly values with per-day calendar flags.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    start: HourStamp,
    values: Vec<f64>,
    /// Flags for every day from `start.day` to the day of the last value.
    calendar: Vec<CalendarFlags>,
}

impl HourlySeries {
    pub fn new(
        start: HourStamp,
        values: Vec<f64>,
        calendar: Vec<CalendarFlags>,
    ) -> Result<Self, SeriesError> {
        HourStamp::new(start.day, start.hour)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite(i));
        }
        let n_days = if values.is_empty() {
            0
        } else {
            (start.add_hours(values.len() as i64 - 1).day - start.day + 1) as usize
        };
        if calendar.len() < n_days {
            return Err(SeriesError::CalendarCoverage {
                first: start.day,
                last: start.day + n_days as i64 - 1,
            });
        }
        let mut calendar = calendar;
        calendar.truncate(n_days);
        for w in 1..calendar.len() {
            if calendar[w].weekday != calendar[w - 1].weekday % 7 + 1 {
                return Err(SeriesError::WeekdayOrder(start.day + w as i64));
            }
        }
        Ok(HourlySeries {
            start,
            values,
            calendar,
        })
    }

    /// Series of whole days starting at hour 1 of `first_day`.
    pub fn from_days(
        first_day: i64,
        values: Vec<f64>,
        cal: &Calendar,
    ) -> Result<Self, SeriesError> {
        let n_days = values.len().div_ceil(24) as i64;
        let flags = cal.days(first_day, first_day + n_days - 1);
        Self::new(
            HourStamp {
                day: first_day,
                hour: 1,
            },
            values,
            flags,
        )
    }

    pub fn start(&self) -> HourStamp {
        self.start
    }

    /// Stamp of the last value. Equals `start` for an empty series.
    pub fn end(&self) -> HourStamp {
        self.start.add_hours(self.values.len().max(1) as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn stamp(&self, k: usize) -> HourStamp {
        self.start.add_hours(k as i64)
    }

    /// Calendar flags of the day holding value `k`.
    pub fn flags(&self, k: usize) -> CalendarFlags {
        self.calendar[(self.stamp(k).day - self.start.day) as usize]
    }

    pub fn day_flags(&self, day: i64) -> Option<CalendarFlags> {
        let i = day - self.start.day;
        (i >= 0)
            .then(|| self.calendar.get(i as usize).copied())
            .flatten()
    }

    pub fn calendar(&self) -> &[CalendarFlags] {
        &self.calendar
    }

    /// Position of `stamp` in the value vector, if covered.
    pub fn position(&self, stamp: HourStamp) -> Option<usize> {
        let k = stamp.index() - self.start.index();
        (k >= 0 && (k as usize) < self.values.len()).then_some(k as usize)
    }

    pub fn get(&self, stamp: HourStamp) -> Option<f64> {
        self.position(stamp).map(|k| self.values[k])
    }

    pub fn covers_day(&self, day: i64) -> bool {
        self.position(HourStamp { day, hour: 1 }).is_some()
            && self.position(HourStamp { day, hour: 24 }).is_some()
    }

    /// Inclusive sub-range `from..=to`.
    pub fn slice(&self, from: HourStamp, to: HourStamp) -> Result<HourlySeries, SeriesError> {
        let err = SeriesError::OutOfRange { from, to };
        if to < from {
            return Err(err);
        }
        let (Some(a), Some(b)) = (self.position(from), self.position(to)) else {
            return Err(err);
        };
        let d0 = (from.day - self.start.day) as usize;
        let d1 = (to.day - self.start.day) as usize;
        Ok(HourlySeries {
            start: from,
            values: self.values[a..=b].to_vec(),
            calendar: self.calendar[d0..=d1].to_vec(),
        })
    }

    /// Whole days `first..=last`.
    pub fn days(&self, first: i64, last: i64) -> Result<HourlySeries, SeriesError> {
        self.slice(
            HourStamp {
                day: first,
                hour: 1,
            },
            HourStamp {
                day: last,
                hour: 24,
            },
        )
    }

    /// The 24 values of `day`.
    pub fn day_values(&self, day: i64) -> Option<&[f64]> {
        let a = self.position(HourStamp { day, hour: 1 })?;
        let b = self.position(HourStamp { day, hour: 24 })?;
        Some(&self.values[a..=b])
    }

    /// Elementwise combination of two series on the same hour range.
    pub fn zip_with(
        &self,
        other: &HourlySeries,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<HourlySeries, SeriesError> {
        if self.start != other.start || self.len() != other.len() {
            return Err(SeriesError::Alignment);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        HourlySeries::new(self.start, values, self.calendar.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<HourlySeries, SeriesError> {
        HourlySeries::new(
            self.start,
            self.values.iter().map(|&v| f(v)).collect(),
            self.calendar.clone(),
        )
    }

    /// Series holding `values` for the hours right after this one ends.
    /// Weekdays continue cyclically; holiday flags are unknown and left false.
    pub fn continuation(&self, values: Vec<f64>) -> Result<HourlySeries, SeriesError> {
        let start = self.end().add_hours(1);
        let last_known = *self.calendar.last().unwrap_or(&CalendarFlags {
            weekday: 1,
            is_holiday: false,
        });
        let mut flags = Vec::new();
        let n_days = values.len().div_ceil(24) + 1;
        for k in 0..n_days as i64 {
            let day = start.day + k;
            let offset = day - self.end().day;
            flags.push(CalendarFlags {
                weekday: weekday_of(offset, last_known.weekday),
                is_holiday: false,
            });
        }
        HourlySeries::new(start, values, flags)
    }

    /// Appends a series that starts right after this one ends.
    pub fn append(&mut self, other: &HourlySeries) -> Result<(), SeriesError> {
        if self.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if other.start != self.end().add_hours(1) {
            return Err(SeriesError::Alignment);
        }
        let skip = usize::from(other.start.day == self.end().day);
        self.calendar
            .extend_from_slice(&other.calendar[skip.min(other.calendar.len())..]);
        self.values.extend_from_slice(&other.values);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal() -> Calendar {
        Calendar::new(1, [3])
    }

    fn series(days: usize) -> HourlySeries {
        HourlySeries::from_days(0, (0..days * 24).map(|k| k as f64).collect(), &cal()).unwrap()
    }

    #[test]
    fn slice_examples() {
        let s = series(2);
        let first = s.days(0, 0).unwrap();
        assert_eq!(first.values(), &s.values()[..24]);
        let one = s
            .slice(HourStamp::new(0, 5).unwrap(), HourStamp::new(0, 5).unwrap())
            .unwrap();
        assert_eq!(one.values(), &[4.0]);
        let bad = s.slice(HourStamp::new(1, 2).unwrap(), HourStamp::new(1, 1).unwrap());
        assert!(matches!(bad, Err(SeriesError::OutOfRange { .. })));
        assert!(s.days(1, 2).is_err());
    }

    #[test]
    fn hour_of_week_examples() {
        let h = |d, h| HourStamp::new(d, h).unwrap();
        let flags = |weekday, is_holiday| CalendarFlags {
            weekday,
            is_holiday,
        };
        assert_eq!(hour_of_week(h(0, 1), flags(1, false)), 1);
        assert_eq!(hour_of_week(h(0, 24), flags(7, false)), 168);
        assert_eq!(hour_of_week(h(0, 5), flags(3, true)), 173);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(HourStamp::new(0, 0).is_err());
        assert!(HourStamp::new(0, 25).is_err());
        let c = cal();
        assert!(matches!(
            HourlySeries::from_days(0, vec![1.0, f64::NAN], &c),
            Err(SeriesError::NonFinite(1))
        ));
        let flags = vec![c.flags(0), c.flags(2)];
        assert!(matches!(
            HourlySeries::new(HourStamp::new(0, 1).unwrap(), vec![0.0; 48], flags),
            Err(SeriesError::WeekdayOrder(1))
        ));
    }

    #[test]
    fn peak_hours() {
        let wd = CalendarFlags {
            weekday: 5,
            is_holiday: false,
        };
        let we = CalendarFlags {
            weekday: 6,
            is_holiday: false,
        };
        assert!(!is_peak(8, wd) && is_peak(9, wd) && is_peak(20, wd) && !is_peak(21, wd));
        assert!(!is_peak(12, we));
    }

    proptest! {
        #[test]
        fn daily_slices_reconstruct_the_series(days in 1usize..20, offset in -50i64..50) {
            let values: Vec<f64> = (0..days * 24).map(|k| (k as f64).sin()).collect();
            let s = HourlySeries::from_days(offset, values, &cal()).unwrap();
            let mut rebuilt = s.days(offset, offset).unwrap();
            for d in 1..days as i64 {
                rebuilt.append(&s.days(offset + d, offset + d).unwrap()).unwrap();
            }
            prop_assert_eq!(rebuilt, s);
        }

        #[test]
        fn hour_of_week_is_a_bijection(weekday in 1u8..=7, hour in 1u8..=24) {
            let slot = hour_of_week(HourStamp::new(0, hour).unwrap(), CalendarFlags { weekday, is_holiday: false });
            prop_assert!((1..=168).contains(&slot));
            prop_assert_eq!(((slot - 1) / 24 + 1) as u8, weekday);
            prop_assert_eq!(((slot - 1) % 24 + 1) as u8, hour);
        }

        #[test]
        fn advancing_a_day_keeps_the_hour(day in -1000i64..1000, hour in 1u8..=24) {
            let s = HourStamp::new(day, hour).unwrap();
            let t = s.add_hours(24);
            prop_assert_eq!(t.day, day + 1);
            prop_assert_eq!(t.hour, hour);
            prop_assert!(s < t);
        }

        #[test]
        fn weekdays_cycle(day in -1000i64..1000, epoch in 1u8..=7) {
            prop_assert_eq!(weekday_of(day + 1, epoch), weekday_of(day, epoch) % 7 + 1);
        }
    }
}
