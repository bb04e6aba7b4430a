//! Three-day stochastic dispatch LP and day-ahead price extraction.
//!
//! A window covers days `d`, `d+1` and `d+2` (72 hours). Only the demand of
//! `d+2` differs between scenarios, so by default the first 48 hours share
//! one set of variables and the last day is copied per scenario. The price
//! estimator is the dual of the energy balance on `d+1`.

mod build;
mod extract;
mod rolling;

use std::collections::BTreeMap;

use epf_lp::{LpError, LpStatus};

pub use build::{build_lp, DispatchModel};
pub use extract::{extract_prices, solve_instance, DispatchResult, SolveDiagnostics};
pub use rolling::{rolling_run, DayOutcome};

/// Hours in one rolling window.
pub const HORIZON: usize = 72;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("invalid dispatch instance: {0}")]
    Model(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("dispatch LP ended {0:?}")]
    SolveFailed(LpStatus),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalParams {
    /// Variable cost at full load, EUR/MWh.
    pub vc_full: f64,
    /// Variable cost at minimum load, EUR/MWh.
    pub vc_minload: f64,
    pub g_min: f64,
    /// EUR per MW brought online.
    pub startup_cost: f64,
    /// MW on outage per horizon hour.
    pub outage: Vec<f64>,
}

impl ThermalParams {
    pub fn simple(vc: f64) -> Self {
        ThermalParams {
            vc_full: vc,
            vc_minload: vc,
            g_min: 0.0,
            startup_cost: 0.0,
            outage: vec![0.0; HORIZON],
        }
    }

    /// Cost per MWh of online capacity left unused, which spreads the
    /// minimum-load penalty over the running capacity.
    pub fn part_load_adder(&self) -> f64 {
        (self.vc_minload - self.vc_full) * self.g_min / (1.0 - self.g_min)
    }
}

/// One step of a water-value merit order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueStep {
    /// MW
    pub capacity: f64,
    /// EUR/MWh per horizon hour.
    pub water_value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterKind {
    Thermal(ThermalParams),
    /// Feed-in profile as a fraction of capacity per hour.
    Renewable {
        profile: Vec<f64>,
    },
    /// Daily-cycle pumped storage; `efficiency` applies to charging and
    /// `cer` is the capacity-to-energy ratio.
    StorageMid {
        efficiency: f64,
        cer: f64,
    },
    /// Seasonal pumped storage priced by water values for both directions.
    StorageLong {
        steps: Vec<ValueStep>,
    },
    HydroReservoir {
        steps: Vec<ValueStep>,
    },
    /// Fixed feed-in of `cap * availability`, netted off demand.
    Baseload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechnologyCluster {
    pub id: String,
    pub zone: usize,
    /// Installed MW per horizon hour.
    pub cap: Vec<f64>,
    pub availability: Vec<f64>,
    pub kind: ClusterKind,
}

impl TechnologyCluster {
    /// Cluster with constant capacity and full availability.
    pub fn new(id: impl Into<String>, zone: usize, cap: f64, kind: ClusterKind) -> Self {
        TechnologyCluster {
            id: id.into(),
            zone,
            cap: vec![cap; HORIZON],
            availability: vec![1.0; HORIZON],
            kind,
        }
    }

    pub fn thermal(id: impl Into<String>, zone: usize, cap: f64, vc: f64) -> Self {
        Self::new(
            id,
            zone,
            cap,
            ClusterKind::Thermal(ThermalParams::simple(vc)),
        )
    }

    pub fn available(&self, t: usize) -> f64 {
        self.cap[t] * self.availability[t]
    }

    pub fn thermal_params(&self) -> Option<&ThermalParams> {
        match &self.kind {
            ClusterKind::Thermal(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneData {
    pub name: String,
    /// MWh as `[scenario][hour]`; a single row applies to every scenario.
    pub demand: Vec<Vec<f64>>,
    /// Minimum thermal output per hour, MW.
    pub chp_mustrun: Vec<f64>,
    /// Control power per block, MW.
    pub reserve_primary: f64,
    pub reserve_sec_pos: f64,
    pub reserve_sec_neg: f64,
    pub voll: f64,
    pub curtc: f64,
}

impl ZoneData {
    pub fn new(name: impl Into<String>, demand: Vec<f64>) -> Self {
        ZoneData {
            name: name.into(),
            demand: vec![demand],
            chp_mustrun: vec![0.0; HORIZON],
            reserve_primary: 0.0,
            reserve_sec_pos: 0.0,
            reserve_sec_neg: 0.0,
            voll: 3000.0,
            curtc: 20.0,
        }
    }

    pub fn demand_at(&self, scenario: usize, t: usize) -> f64 {
        self.demand[scenario.min(self.demand.len() - 1)][t]
    }

    fn has_reserves(&self) -> bool {
        self.reserve_primary > 0.0 || self.reserve_sec_pos > 0.0 || self.reserve_sec_neg > 0.0
    }
}

/// Transfer capacities by ordered zone pair; absent pairs have none.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NtcMatrix {
    links: BTreeMap<(usize, usize), Vec<f64>>,
}

impl NtcMatrix {
    pub fn set(&mut self, from: usize, to: usize, hourly: Vec<f64>) {
        self.links.insert((from, to), hourly);
    }

    pub fn get(&self, from: usize, to: usize, t: usize) -> f64 {
        self.links.get(&(from, to)).map_or(0.0, |v| v[t])
    }

    pub fn links(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<f64>)> {
        self.links.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScenarioIndexing {
    /// One set of variables for `d` and `d+1`, scenario copies for `d+2`.
    #[default]
    Shared,
    /// Every hour copied per scenario; prices are the sum of the scenario
    /// duals.
    FullyIndexed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchInstance {
    pub first_day: i64,
    pub probabilities: Vec<f64>,
    pub clusters: Vec<TechnologyCluster>,
    pub zones: Vec<ZoneData>,
    pub ntc: NtcMatrix,
    /// Hour of day (0..24) to primary reserve block.
    pub primary_blocks: Vec<usize>,
    /// Hour of day (0..24) to secondary reserve block.
    pub secondary_blocks: Vec<usize>,
    pub indexing: ScenarioIndexing,
    /// Online MW per cluster in the hour before the window; without it the
    /// first hour is charged no start-ups.
    pub initial_online: Option<Vec<f64>>,
}

/// Six four-hour blocks.
pub fn four_hour_blocks() -> Vec<usize> {
    (0..24).map(|h| h / 4).collect()
}

impl DispatchInstance {
    pub fn new(first_day: i64, zones: Vec<ZoneData>, clusters: Vec<TechnologyCluster>) -> Self {
        DispatchInstance {
            first_day,
            probabilities: vec![1.0],
            clusters,
            zones,
            ntc: NtcMatrix::default(),
            primary_blocks: four_hour_blocks(),
            secondary_blocks: four_hour_blocks(),
            indexing: ScenarioIndexing::Shared,
            initial_online: None,
        }
    }

    pub fn target_day(&self) -> i64 {
        self.first_day + 1
    }

    pub fn n_scenarios(&self) -> usize {
        self.probabilities.len()
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let bad = |msg: String| Err(DispatchError::Model(msg));
        let s = self.probabilities.len();
        if s == 0 || self.probabilities.iter().any(|&p| !(p >= 0.0)) {
            return bad("scenario probabilities must be non-negative and non-empty".into());
        }
        if (self.probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("scenario probabilities must sum to 1".into());
        }
        for blocks in [&self.primary_blocks, &self.secondary_blocks] {
            if blocks.len() != 24 {
                return bad("reserve block maps need 24 entries".into());
            }
        }
        let hourly = |v: &[f64]| v.len() == HORIZON && v.iter().all(|x| x.is_finite());
        for z in &self.zones {
            if z.demand.is_empty() || (z.demand.len() != 1 && z.demand.len() != s) {
                return bad(format!(
                    "zone {}: demand needs 1 or {s} scenario rows",
                    z.name
                ));
            }
            if z.demand
                .iter()
                .any(|d| !hourly(d) || d.iter().any(|&v| v < 0.0))
            {
                return bad(format!(
                    "zone {}: demand must be 72 non-negative values",
                    z.name
                ));
            }
            if self.indexing == ScenarioIndexing::Shared {
                let first = &z.demand[0];
                if z.demand.iter().any(|d| {
                    d[..48]
                        .iter()
                        .zip(&first[..48])
                        .any(|(a, b)| (a - b).abs() > 1e-9)
                }) {
                    return bad(format!(
                        "zone {}: demand of d and d+1 must not differ across scenarios",
                        z.name
                    ));
                }
            }
            if !hourly(&z.chp_mustrun) {
                return bad(format!("zone {}: chp must-run needs 72 values", z.name));
            }
            if [z.reserve_primary, z.reserve_sec_pos, z.reserve_sec_neg]
                .iter()
                .any(|&r| !(r >= 0.0))
            {
                return bad(format!("zone {}: reserves must be non-negative", z.name));
            }
            if !(z.voll.is_finite() && z.curtc.is_finite()) {
                return bad(format!("zone {}: voll and curtc must be finite", z.name));
            }
        }
        for c in &self.clusters {
            if c.zone >= self.zones.len() {
                return bad(format!("cluster {}: unknown zone {}", c.id, c.zone));
            }
            if !hourly(&c.cap) || !hourly(&c.availability) || c.cap.iter().any(|&v| v < 0.0) {
                return bad(format!(
                    "cluster {}: capacity and availability need 72 values, cap >= 0",
                    c.id
                ));
            }
            match &c.kind {
                ClusterKind::Thermal(p) => {
                    if !(0.0..1.0).contains(&p.g_min) {
                        return bad(format!("cluster {}: g_min must lie in [0, 1)", c.id));
                    }
                    if !hourly(&p.outage)
                        || p.outage
                            .iter()
                            .zip(&c.cap)
                            .any(|(o, cap)| *o < 0.0 || o > cap)
                    {
                        return bad(format!("cluster {}: outage must lie in [0, cap]", c.id));
                    }
                    if !(p.vc_full.is_finite() && p.vc_minload.is_finite() && p.startup_cost >= 0.0)
                    {
                        return bad(format!(
                            "cluster {}: costs must be finite, start-up cost >= 0",
                            c.id
                        ));
                    }
                }
                ClusterKind::Renewable { profile } => {
                    if !hourly(profile) || profile.iter().any(|&v| v < 0.0) {
                        return bad(format!(
                            "cluster {}: feed-in profile needs 72 values >= 0",
                            c.id
                        ));
                    }
                }
                ClusterKind::StorageMid { efficiency, cer } => {
                    if !(*efficiency > 0.0 && *efficiency <= 1.0) {
                        return bad(format!("cluster {}: efficiency must lie in (0, 1]", c.id));
                    }
                    if !(*cer > 0.0) {
                        return bad(format!("cluster {}: cer must be positive", c.id));
                    }
                }
                ClusterKind::StorageLong { steps } | ClusterKind::HydroReservoir { steps } => {
                    if steps
                        .iter()
                        .any(|st| !(st.capacity >= 0.0) || !hourly(&st.water_value))
                    {
                        return bad(format!(
                            "cluster {}: value steps need capacity >= 0 and 72 water values",
                            c.id
                        ));
                    }
                }
                ClusterKind::Baseload => {}
            }
        }
        for (&(a, b), v) in self.ntc.links() {
            if a >= self.zones.len() || b >= self.zones.len() || a == b {
                return bad(format!("ntc link {a}->{b} does not join two zones"));
            }
            if !hourly(v) || v.iter().any(|&x| x < 0.0) {
                return bad(format!("ntc link {a}->{b} needs 72 values >= 0"));
            }
        }
        if let Some(on) = &self.initial_online {
            if on.len() != self.clusters.len() {
                return bad("initial online capacity needs one value per cluster".into());
            }
        }
        Ok(())
    }
}
