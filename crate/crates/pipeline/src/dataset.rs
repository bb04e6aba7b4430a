//! In-memory form of an input bundle. Days are counted from `epoch`.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Days, NaiveDate};
use epf_core::timeseries::Calendar;

/// Hourly values of consecutive days starting at `first_day`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DayGrid {
    pub first_day: i64,
    pub values: Vec<[f64; 24]>,
}

impl DayGrid {
    pub fn new(first_day: i64, values: Vec<[f64; 24]>) -> Self {
        DayGrid { first_day, values }
    }

    pub fn last_day(&self) -> i64 {
        self.first_day + self.values.len() as i64 - 1
    }

    pub fn day(&self, day: i64) -> Option<&[f64; 24]> {
        if day < self.first_day {
            return None;
        }
        self.values.get((day - self.first_day) as usize)
    }

    pub fn covers(&self, first: i64, last: i64) -> bool {
        !self.values.is_empty() && first >= self.first_day && last <= self.last_day()
    }

    /// Hourly values of `first..=last` in one vector.
    pub fn hours(&self, first: i64, last: i64) -> Option<Vec<f64>> {
        if !self.covers(first, last) {
            return None;
        }
        Some(
            (first..=last)
                .flat_map(|d| *self.day(d).expect("covered"))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClusterKindTag {
    Thermal,
    Renewable,
    StorageMid,
    StorageLong,
    HydroReservoir,
    Baseload,
}

impl ClusterKindTag {
    pub const ALL: [ClusterKindTag; 6] = [
        ClusterKindTag::Thermal,
        ClusterKindTag::Renewable,
        ClusterKindTag::StorageMid,
        ClusterKindTag::StorageLong,
        ClusterKindTag::HydroReservoir,
        ClusterKindTag::Baseload,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClusterKindTag::Thermal => "thermal",
            ClusterKindTag::Renewable => "renewable",
            ClusterKindTag::StorageMid => "storage_mid",
            ClusterKindTag::StorageLong => "storage_long",
            ClusterKindTag::HydroReservoir => "hydro_reservoir",
            ClusterKindTag::Baseload => "baseload",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// One row of the cluster table. Cost fields apply to thermal units: either
/// fixed variable costs or a fuel with efficiencies, priced per day from the
/// fuel table.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub id: String,
    pub zone: String,
    pub kind: ClusterKindTag,
    pub cap_mw: f64,
    pub availability: f64,
    pub vc_full: Option<f64>,
    pub vc_minload: Option<f64>,
    pub fuel: Option<String>,
    pub eff_full: Option<f64>,
    pub eff_minload: Option<f64>,
    /// Tonnes of CO2 per MWh of fuel.
    pub co2_factor: f64,
    pub g_min: f64,
    pub startup_cost: f64,
    pub storage_efficiency: Option<f64>,
    pub cer: Option<f64>,
}

impl ClusterSpec {
    pub fn new(id: &str, zone: &str, kind: ClusterKindTag, cap_mw: f64) -> Self {
        ClusterSpec {
            id: id.into(),
            zone: zone.into(),
            kind,
            cap_mw,
            availability: 1.0,
            vc_full: None,
            vc_minload: None,
            fuel: None,
            eff_full: None,
            eff_minload: None,
            co2_factor: 0.0,
            g_min: 0.0,
            startup_cost: 0.0,
            storage_efficiency: None,
            cer: None,
        }
    }
}

/// Reserve requirements of a zone on one day, MW.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReserveDay {
    pub primary: f64,
    pub secondary_pos: f64,
    pub secondary_neg: f64,
}

/// Fuel used to price CO2 in the fuel table.
pub const CO2: &str = "co2";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    /// Day 0; the Unix epoch unless set otherwise.
    pub epoch: NaiveDate,
    pub zones: Vec<String>,
    pub load_actual: BTreeMap<String, DayGrid>,
    pub load_tso: BTreeMap<String, DayGrid>,
    /// Feed-in forecast per renewable cluster as a share of capacity.
    pub res_profile: BTreeMap<String, DayGrid>,
    pub clusters: Vec<ClusterSpec>,
    /// EUR per MWh of fuel (EUR per tonne for CO2) by fuel and day.
    pub fuel_prices: BTreeMap<String, BTreeMap<i64, f64>>,
    pub outages: BTreeMap<String, DayGrid>,
    pub chp: BTreeMap<String, DayGrid>,
    pub reserves: BTreeMap<String, BTreeMap<i64, ReserveDay>>,
    pub ntc: BTreeMap<(String, String), DayGrid>,
    /// Value steps `(capacity MW, EUR/MWh)` per cluster and day.
    pub water_values: BTreeMap<String, BTreeMap<i64, Vec<(f64, f64)>>>,
    pub holidays: BTreeMap<String, BTreeSet<i64>>,
    pub wind: BTreeMap<String, DayGrid>,
    pub prices: BTreeMap<String, DayGrid>,
}

impl Dataset {
    pub fn date(&self, day: i64) -> NaiveDate {
        let e = self.epoch;
        if day >= 0 {
            e.checked_add_days(Days::new(day as u64))
                .expect("date in range")
        } else {
            e.checked_sub_days(Days::new(day.unsigned_abs()))
                .expect("date in range")
        }
    }

    pub fn day_of(&self, date: NaiveDate) -> i64 {
        (date - self.epoch).num_days()
    }

    pub fn calendar(&self, zone: &str) -> Calendar {
        let weekday = self.epoch.weekday().number_from_monday() as u8;
        Calendar::new(
            weekday,
            self.holidays.get(zone).into_iter().flatten().copied(),
        )
    }

    pub fn zone_index(&self, zone: &str) -> Option<usize> {
        self.zones.iter().position(|z| z == zone)
    }

    /// Days covered by every zone's actual and TSO load.
    pub fn load_range(&self) -> Option<(i64, i64)> {
        let grids = self.load_actual.values().chain(self.load_tso.values());
        grids.fold(None, |acc, g| {
            let r = (g.first_day, g.last_day());
            Some(acc.map_or(r, |(a, b): (i64, i64)| (a.max(r.0), b.min(r.1))))
        })
    }

    /// Full-load and minimum-load variable cost of a thermal cluster on `day`.
    pub fn variable_costs(&self, c: &ClusterSpec, day: i64) -> Result<(f64, f64), String> {
        let fuel_cost = |eff: f64| -> Result<f64, String> {
            let fuel = c
                .fuel
                .as_deref()
                .ok_or_else(|| format!("cluster {}: no variable cost and no fuel", c.id))?;
            let price = |f: &str| {
                self.fuel_prices
                    .get(f)
                    .and_then(|m| m.get(&day))
                    .copied()
                    .ok_or_else(|| format!("no {f} price for {}", self.date(day)))
            };
            let co2 = if c.co2_factor != 0.0 {
                price(CO2)? * c.co2_factor
            } else {
                0.0
            };
            Ok((price(fuel)? + co2) / eff)
        };
        let full = match (c.vc_full, c.eff_full) {
            (Some(v), _) => v,
            (None, Some(eff)) => fuel_cost(eff)?,
            (None, None) => {
                return Err(format!(
                    "cluster {}: needs vc_full or fuel and eff_full",
                    c.id
                ))
            }
        };
        let minload = match (c.vc_minload, c.eff_minload) {
            (Some(v), _) => v,
            (None, Some(eff)) if c.vc_full.is_none() => fuel_cost(eff)?,
            _ => full,
        };
        Ok((full, minload))
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date {s:?}: {e}"))
}
