//! Synthetic bundles from documented generative models.
//!
//! Two zones, `A` (focal) and `B`, joined by a 3 GW interconnector. Load is a
//! seasonal, weekly and daily shape with noise; the TSO forecast misses it by
//! a weekly bias profile plus a SARMA(1,1)x(1,1)_24 error. Thermal costs
//! follow daily random walks of coal, gas and CO2 prices. Wind and solar
//! feed-in follow persistent daily levels.
//!
//! Actual prices come from a second pass: the bundle is first written with
//! placeholder prices, the dispatch stage is run on it, and the actual price
//! is set to that dispatch price plus a univariate ARX error path driven by
//! the zone's holidays and wind forecast.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use epf_core::load::SarmaParams;
use epf_core::postproc::UvArxParams;
use epf_core::simulate::{gaussian, rng, sarma_path, uv_arx_path, ErrorDay};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::{write_bundle, BundleError, PRICES};
use crate::config::{PipelineConfig, Windows};
use crate::dataset::{ClusterKindTag, ClusterSpec, Dataset, DayGrid, ReserveDay, CO2};
use crate::run::{run, RunError, Until};
use crate::stages::DispatchStage;
use crate::store::{Stage, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    /// Ten evaluation days on short windows, with a hydro reservoir,
    /// reserves and part-load costs.
    Toy,
    /// 210 evaluation days (5040 hours) on the default load and sub-model
    /// windows; thermal units without minimum load.
    Acceptance,
}

impl FixtureKind {
    fn lean(self) -> bool {
        self == FixtureKind::Acceptance
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{0}")]
    Io(String),
    #[error("dispatch failed on {0} days of the fixture")]
    Dispatch(usize),
}

/// Error model of the acceptance prices: weak persistence, a positive
/// intercept, a strong holiday discount and a negative wind effect per GW.
pub const PRICE_ERROR: UvArxParams = UvArxParams {
    phi: [4.0, 0.25, 0.05, 0.1, 0.05, 0.0],
    omega: [0.02, 0.02, -10.0, -0.5],
    sigma2: 9.0,
};

/// TSO forecast error remainder, MW.
pub const LOAD_ERROR: SarmaParams = SarmaParams {
    phi0: 0.0,
    phi1: 0.8,
    phi24: 0.3,
    omega1: 0.2,
    omega24: 0.1,
    sigma2: 300.0 * 300.0,
};

const FIRST_DATE: (i32, u32, u32) = (2016, 1, 4);

pub fn fixture_config(
    kind: FixtureKind,
    bundle: PathBuf,
    run_dir: PathBuf,
    seed: u64,
) -> PipelineConfig {
    let start =
        NaiveDate::from_ymd_opt(FIRST_DATE.0, FIRST_DATE.1, FIRST_DATE.2).expect("valid date");
    let (windows, lead, eval_days) = match kind {
        FixtureKind::Toy => (
            Windows {
                load_days: 40,
                postproc_weeks: vec![2, 3, 4],
                qra_days: 14,
                tso_history_days: 14,
            },
            130,
            10,
        ),
        FixtureKind::Acceptance => (
            Windows {
                qra_days: 182,
                ..Windows::default()
            },
            1180,
            210,
        ),
    };
    let e0 = start + chrono::Days::new(lead);
    let e1 = e0 + chrono::Days::new(eval_days - 1);
    let mut cfg = PipelineConfig::new(bundle, run_dir, "A", e0, e1);
    cfg.windows = windows;
    cfg.seed = seed;
    cfg
}

struct Gen {
    rng: ChaCha8Rng,
    ds: Dataset,
    days: i64,
}

fn hourly(days: i64, f: impl Fn(i64, usize) -> f64) -> DayGrid {
    DayGrid::new(
        0,
        (0..days)
            .map(|d| std::array::from_fn(|h| f(d, h)))
            .collect(),
    )
}

/// Daily AR(1) level in [lo, hi] with hourly wiggle.
fn persistent_profile(
    rng: &mut ChaCha8Rng,
    days: i64,
    mean: f64,
    lo: f64,
    hi: f64,
) -> Vec<[f64; 24]> {
    let mut level = mean;
    (0..days)
        .map(|_| {
            level = mean + 0.7 * (level - mean) + 0.12 * gaussian(rng, 1, 1.0)[0];
            let wiggle = gaussian(rng, 24, 0.03);
            let spread = rng.random_range(0.2..2.0);
            std::array::from_fn(|h| {
                (level + spread * wiggle[h] + 0.04 * ((h as f64) * PI / 12.0).sin()).clamp(lo, hi)
            })
        })
        .collect()
}

impl Gen {
    fn new(days: i64, seed: u64) -> Self {
        let mut ds = Dataset {
            epoch: NaiveDate::from_ymd_opt(FIRST_DATE.0, FIRST_DATE.1, FIRST_DATE.2)
                .expect("valid date"),
            ..Dataset::default()
        };
        ds.zones = vec!["A".into(), "B".into()];
        Gen {
            rng: rng(seed),
            ds,
            days,
        }
    }

    fn holidays(&mut self) {
        let fixed = [
            (1, 1),
            (4, 14),
            (5, 1),
            (5, 26),
            (10, 3),
            (12, 25),
            (12, 26),
        ];
        let set: BTreeSet<i64> = (0..self.days)
            .filter(|&d| {
                let date = self.ds.date(d);
                fixed.contains(&(date.month(), date.day()))
            })
            .collect();
        for z in ["A", "B"] {
            self.ds.holidays.insert(z.into(), set.clone());
        }
    }

    fn load(&mut self, zone: &str, scale: f64, seed: u64) {
        let cal = self.ds.calendar(zone);
        // trough before dawn, peak mid-afternoon, evening shoulder
        let shape = |h: usize| -> f64 {
            let x = h as f64;
            -0.12 * (2.0 * PI * (x - 4.0) / 24.0).cos() + 0.03 * (4.0 * PI * (x - 1.0) / 24.0).cos()
        };
        let mut level = 0.0;
        let daily: Vec<f64> = (0..self.days)
            .map(|_| {
                level = 0.8 * level + gaussian(&mut self.rng, 1, 0.02)[0];
                level
            })
            .collect();
        let noise = gaussian(&mut self.rng, self.days as usize * 24, 0.006);
        let actual = hourly(self.days, |d, h| {
            let f = cal.flags(d);
            let season =
                0.12 * (2.0 * PI * (self.ds.date(d).ordinal() as f64 - 15.0) / 365.25).cos();
            let week = match (f.is_holiday, f.weekday) {
                (true, _) | (_, 7) => -0.16,
                (_, 6) => -0.1,
                _ => 0.0,
            };
            scale
                * (1.0 + season + week + shape(h) + daily[d as usize] + noise[d as usize * 24 + h])
        });
        let rc = sarma_path(&LOAD_ERROR, self.days as usize * 24, 500, seed);
        let tso = hourly(self.days, |d, h| {
            let wd = cal.flags(d).weekday as f64;
            let bias = 300.0 * (2.0 * PI * h as f64 / 24.0).sin() + 150.0 * (wd - 4.0);
            actual.values[d as usize][h] - (bias + rc[d as usize * 24 + h]) * scale / 45000.0
        });
        self.ds.load_actual.insert(zone.into(), actual);
        self.ds.load_tso.insert(zone.into(), tso);
    }

    fn fuels(&mut self) {
        for (fuel, start) in [("coal", 9.0), ("gas", 18.0), (CO2, 20.0)] {
            let mut p: f64 = start;
            let mut series = BTreeMap::new();
            for d in 0..self.days {
                p *= (gaussian(&mut self.rng, 1, 0.012)[0] + 0.02 * (start / p).ln()).exp();
                series.insert(d, p);
            }
            self.ds.fuel_prices.insert(fuel.into(), series);
        }
    }

    fn thermal(
        &mut self,
        id: &str,
        zone: &str,
        cap: f64,
        fuel: Option<(&str, f64, f64)>,
        vc: Option<f64>,
    ) -> &mut ClusterSpec {
        let mut c = ClusterSpec::new(id, zone, ClusterKindTag::Thermal, cap);
        if let Some((f, eff, co2)) = fuel {
            c.fuel = Some(f.into());
            c.eff_full = Some(eff);
            c.co2_factor = co2;
        }
        c.vc_full = vc;
        c.availability = 0.95;
        self.ds.clusters.push(c);
        self.ds.clusters.last_mut().expect("just pushed")
    }

    fn renewables(&mut self, zone: &str, wind_cap: f64, solar_cap: f64) {
        let days = self.days;
        let wind = persistent_profile(&mut self.rng, days, 0.3, 0.02, 0.95);
        let cloud: Vec<f64> = (0..days).map(|_| self.rng.random_range(0.3..1.0)).collect();
        let solar = hourly(days, |d, h| {
            let season = 0.75
                + 0.25 * (2.0 * PI * (self.ds.date(d).ordinal() as f64 - 172.0) / 365.25).cos();
            let sun = ((h as f64 - 6.0) * PI / 14.0).sin().max(0.0);
            0.7 * season * sun * cloud[d as usize]
        });
        let wid = format!("wind_{zone}");
        let sid = format!("solar_{zone}");
        self.ds
            .res_profile
            .insert(wid.clone(), DayGrid::new(0, wind.clone()));
        self.ds.res_profile.insert(sid.clone(), solar);
        self.ds.wind.insert(
            zone.into(),
            DayGrid::new(0, wind.iter().map(|d| d.map(|p| p * wind_cap)).collect()),
        );
        self.ds.clusters.push(ClusterSpec::new(
            &wid,
            zone,
            ClusterKindTag::Renewable,
            wind_cap,
        ));
        self.ds.clusters.push(ClusterSpec::new(
            &sid,
            zone,
            ClusterKindTag::Renewable,
            solar_cap,
        ));
    }

    fn system(&mut self, lean: bool) {
        let coal = Some(("coal", 0.4, 0.34));
        let ccgt = Some(("gas", 0.55, 0.2));
        let ocgt = Some(("gas", 0.35, 0.2));
        let mut base = ClusterSpec::new("nuclear_A", "A", ClusterKindTag::Baseload, 8000.0);
        base.availability = 0.9;
        self.ds.clusters.push(base);
        let c = self.thermal("coal_A", "A", 15000.0, coal, None);
        if !lean {
            c.g_min = 0.3;
            c.eff_minload = Some(0.33);
            c.startup_cost = 40.0;
        }
        self.thermal("ccgt_A", "A", 15000.0, ccgt, None);
        self.thermal("ocgt_A", "A", 12000.0, ocgt, None);
        self.thermal("oil_A", "A", 16000.0, None, Some(150.0));
        self.renewables("A", 20000.0, 15000.0);
        let mut psp = ClusterSpec::new("psp_A", "A", ClusterKindTag::StorageMid, 3000.0);
        psp.storage_efficiency = Some(0.75);
        psp.cer = Some(0.125);
        self.ds.clusters.push(psp);

        let mut base = ClusterSpec::new("nuclear_B", "B", ClusterKindTag::Baseload, 4000.0);
        base.availability = 0.9;
        self.ds.clusters.push(base);
        self.thermal("coal_B", "B", 9000.0, coal, None);
        self.thermal("ccgt_B", "B", 9000.0, ccgt, None);
        self.thermal("oil_B", "B", 9000.0, None, Some(160.0));
        self.renewables("B", 8000.0, 4000.0);

        if !lean {
            self.ds.clusters.push(ClusterSpec::new(
                "hydro_B",
                "B",
                ClusterKindTag::HydroReservoir,
                2500.0,
            ));
            let steps: BTreeMap<i64, Vec<(f64, f64)>> = (0..self.days)
                .step_by(7)
                .map(|d| {
                    let s = (2.0 * PI * d as f64 / 365.25).cos();
                    (d, vec![(1000.0, 35.0 + 5.0 * s), (1500.0, 55.0 + 8.0 * s)])
                })
                .collect();
            self.ds.water_values.insert("hydro_B".into(), steps);
            for (z, r) in [("A", 600.0), ("B", 300.0)] {
                let days = (0..self.days)
                    .map(|d| {
                        (
                            d,
                            ReserveDay {
                                primary: r * 0.3,
                                secondary_pos: r,
                                secondary_neg: r,
                            },
                        )
                    })
                    .collect();
                self.ds.reserves.insert(z.into(), days);
            }
            // a two-week coal outage
            let mut outage = vec![[0.0; 24]; self.days as usize];
            for day in outage.iter_mut().skip(20).take(14) {
                *day = [3000.0; 24];
            }
            self.ds
                .outages
                .insert("coal_A".into(), DayGrid::new(0, outage));
        } else {
            self.ds.outages.insert(
                "coal_A".into(),
                DayGrid::new(0, vec![[0.0; 24]; self.days as usize]),
            );
        }
        for (z, chp) in [("A", 3000.0), ("B", 1000.0)] {
            let grid = hourly(self.days, |d, _| {
                chp * (1.0
                    + 0.4 * (2.0 * PI * (self.ds.date(d).ordinal() as f64 - 15.0) / 365.25).cos())
            });
            self.ds.chp.insert(z.into(), grid);
        }
        for link in [("A", "B"), ("B", "A")] {
            self.ds.ntc.insert(
                (link.0.into(), link.1.into()),
                hourly(self.days, |_, _| 3000.0),
            );
        }
    }

    fn placeholder_prices(&mut self) {
        for z in ["A", "B"] {
            self.ds
                .prices
                .insert(z.into(), hourly(self.days, |_, _| 40.0));
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> FixtureError {
    FixtureError::Io(format!("{}: {e}", path.display()))
}

/// Writes a fixture bundle under `out/bundle`, its config at
/// `out/config.toml` with run directory `out/run`, and returns the config.
/// The dispatch pass of the price generation leaves its results in the run
/// directory, where the pipeline reuses them.
pub fn generate(kind: FixtureKind, out: &Path, seed: u64) -> Result<PipelineConfig, FixtureError> {
    let bundle = out.join("bundle");
    let cfg = fixture_config(kind, bundle.clone(), out.join("run"), seed);
    let days = (cfg.eval_end
        - NaiveDate::from_ymd_opt(FIRST_DATE.0, FIRST_DATE.1, FIRST_DATE.2).expect("valid"))
    .num_days()
        + 2;
    let mut g = Gen::new(days, seed);
    g.holidays();
    g.load("A", 45000.0, seed ^ 0xA);
    g.load("B", 25000.0, seed ^ 0xB);
    g.fuels();
    g.system(kind.lean());
    g.placeholder_prices();
    write_bundle(&g.ds, &bundle)?;
    let rel = |p: &Path| {
        p.strip_prefix(out)
            .map(Path::to_path_buf)
            .unwrap_or_else(|_| p.to_path_buf())
    };
    let mut on_disk = cfg.clone();
    on_disk.bundle = rel(&cfg.bundle);
    on_disk.run_dir = rel(&cfg.run_dir);
    let cfg_path = out.join("config.toml");
    fs::write(&cfg_path, on_disk.to_toml()).map_err(|e| io_err(&cfg_path, e))?;

    // dispatch pass, then prices = dispatch price + ARX error
    let first_pass = run(&cfg, Until::Dispatch)?;
    let store = Store::open(&cfg.run_dir).map_err(|e| FixtureError::Io(e.to_string()))?;
    let dispatch_days: Vec<NaiveDate> = first_pass
        .manifest
        .stages
        .get(&Stage::Dispatch)
        .map(|m| m.keys().copied().collect())
        .unwrap_or_default();
    let mut estimator: BTreeMap<i64, DispatchStage> = BTreeMap::new();
    let mut failed = 0;
    for date in dispatch_days {
        match store.read_json::<DispatchStage>(&Store::stage_file(Stage::Dispatch, date)) {
            Ok(s)
                if first_pass
                    .manifest
                    .record(Stage::Dispatch, date)
                    .is_some_and(|r| r.digest.is_some()) =>
            {
                estimator.insert(g.ds.day_of(date), s);
            }
            _ => failed += 1,
        }
    }
    if failed > 0 || estimator.is_empty() {
        return Err(FixtureError::Dispatch(failed));
    }
    let first = *estimator.keys().next().expect("non-empty");
    let warmup = 28;
    let exo: Vec<ErrorDay> = (first - warmup..days)
        .map(|d| ErrorDay {
            holiday: g.ds.holidays["A"].contains(&d),
            wind: g.ds.wind["A"]
                .day(d)
                .map_or([0.0; 24], |w| w.map(|x| x * 1e-3)),
        })
        .collect();
    let errors = uv_arx_path(&PRICE_ERROR, &exo, seed ^ 0x5EED);
    for (zone, z) in [("A", 0usize), ("B", 1)] {
        let grid = g.ds.prices.get_mut(zone).expect("placeholder prices");
        for (&d, s) in &estimator {
            let e = if zone == "A" {
                errors[(d - first + warmup) as usize]
            } else {
                [0.0; 24]
            };
            grid.values[d as usize] = std::array::from_fn(|h| s.prices[z][h] + e[h]);
        }
    }
    let prices_only = Dataset {
        prices: g.ds.prices.clone(),
        epoch: g.ds.epoch,
        ..Dataset::default()
    };
    write_prices(&prices_only, &bundle)?;
    Ok(cfg)
}

fn write_prices(ds: &Dataset, dir: &Path) -> Result<(), FixtureError> {
    let tmp = dir.join("prices_tmp");
    write_bundle(ds, &tmp)?;
    fs::rename(tmp.join(PRICES.name), dir.join(PRICES.name)).map_err(|e| io_err(dir, e))?;
    fs::remove_dir_all(&tmp).map_err(|e| io_err(&tmp, e))
}
