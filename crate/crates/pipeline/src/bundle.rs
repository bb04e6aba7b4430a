//! Reading and writing the CSV input bundle.
//!
//! Hourly files carry local hour-beginning timestamps (`YYYY-MM-DDTHH:MM`).
//! Daylight-saving days are normalised to 24 hours: a repeated hour is
//! averaged and a skipped hour is interpolated. Gaps of up to three hours are
//! interpolated linearly; longer gaps are coverage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime, Timelike};

use crate::dataset::{parse_date, ClusterKindTag, ClusterSpec, Dataset, DayGrid, ReserveDay};

/// Longest run of missing hours that is interpolated.
pub const MAX_GAP_HOURS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("schema errors:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
    #[error("coverage errors:\n  {}", .0.join("\n  "))]
    Coverage(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub struct FileSchema {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub required: bool,
}

pub const LOAD_ACTUAL: FileSchema = FileSchema {
    name: "load_actual.csv",
    columns: &["timestamp", "zone", "load_mw"],
    required: true,
};
pub const LOAD_TSO: FileSchema = FileSchema {
    name: "load_tso_forecast.csv",
    columns: &["timestamp", "zone", "load_mw"],
    required: true,
};
pub const RES_FORECAST: FileSchema = FileSchema {
    name: "res_forecast.csv",
    columns: &["timestamp", "cluster", "profile_pu"],
    required: true,
};
pub const CLUSTERS: FileSchema = FileSchema {
    name: "clusters.csv",
    columns: &[
        "cluster",
        "zone",
        "kind",
        "cap_mw",
        "availability_pu",
        "vc_full_eur_per_mwh",
        "vc_minload_eur_per_mwh",
        "fuel",
        "eff_full_pu",
        "eff_minload_pu",
        "co2_t_per_mwh_fuel",
        "g_min_pu",
        "startup_eur_per_mw",
        "storage_efficiency_pu",
        "cer_per_h",
    ],
    required: true,
};
pub const FUEL_PRICES: FileSchema = FileSchema {
    name: "fuel_co2_prices.csv",
    columns: &["date", "fuel", "price_eur_per_unit"],
    required: true,
};
pub const OUTAGES: FileSchema = FileSchema {
    name: "outages.csv",
    columns: &["timestamp", "cluster", "outage_mw"],
    required: true,
};
pub const CHP: FileSchema = FileSchema {
    name: "chp_mustrun.csv",
    columns: &["timestamp", "zone", "chp_mw"],
    required: true,
};
pub const RESERVES: FileSchema = FileSchema {
    name: "reserves.csv",
    columns: &[
        "date",
        "zone",
        "primary_mw",
        "secondary_pos_mw",
        "secondary_neg_mw",
    ],
    required: true,
};
pub const NTC: FileSchema = FileSchema {
    name: "ntc.csv",
    columns: &["timestamp", "from_zone", "to_zone", "ntc_mw"],
    required: false,
};
pub const WATER_VALUES: FileSchema = FileSchema {
    name: "water_values.csv",
    columns: &[
        "date",
        "cluster",
        "step",
        "capacity_mw",
        "water_value_eur_per_mwh",
    ],
    required: true,
};
pub const HOLIDAYS: FileSchema = FileSchema {
    name: "holidays.csv",
    columns: &["date", "zone", "name"],
    required: true,
};
pub const WIND: FileSchema = FileSchema {
    name: "wind_forecast.csv",
    columns: &["timestamp", "zone", "wind_mw"],
    required: true,
};
pub const PRICES: FileSchema = FileSchema {
    name: "prices_actual.csv",
    columns: &["timestamp", "zone", "price_eur_per_mwh"],
    required: true,
};

pub const ALL_FILES: [&FileSchema; 13] = [
    &LOAD_ACTUAL,
    &LOAD_TSO,
    &RES_FORECAST,
    &CLUSTERS,
    &FUEL_PRICES,
    &OUTAGES,
    &CHP,
    &RESERVES,
    &NTC,
    &WATER_VALUES,
    &HOLIDAYS,
    &WIND,
    &PRICES,
];

/// Result of reading a bundle: the dataset plus non-fatal warnings.
#[derive(Debug)]
pub struct Ingested {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

type Row = BTreeMap<String, String>;

struct Reader {
    dir: PathBuf,
    schema_errors: Vec<String>,
    coverage_errors: Vec<String>,
    warnings: Vec<String>,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    [
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%d %H:%M:%S",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

impl Reader {
    /// Rows of a file after checking its header; `None` when the file is
    /// missing or unreadable (already reported).
    fn rows(&mut self, schema: &FileSchema) -> Result<Option<Vec<(usize, Row)>>, BundleError> {
        let path = self.dir.join(schema.name);
        if !path.exists() {
            if schema.required {
                self.schema_errors
                    .push(format!("{}: file missing", schema.name));
            } else {
                self.warnings.push(format!(
                    "{} missing; all cross-border capacities are zero",
                    schema.name
                ));
            }
            return Ok(None);
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|source| BundleError::Csv {
                path: path.clone(),
                source,
            })?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|source| BundleError::Csv {
                path: path.clone(),
                source,
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let missing: Vec<&str> = schema
            .columns
            .iter()
            .copied()
            .filter(|c| !header.iter().any(|h| h == c))
            .collect();
        let extra: Vec<&String> = header
            .iter()
            .filter(|h| !schema.columns.contains(&h.as_str()))
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            self.schema_errors.push(format!(
                "{}: header mismatch (missing {:?}, unexpected {:?})",
                schema.name, missing, extra
            ));
            return Ok(None);
        }
        let mut out = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            match rec {
                Ok(r) => out.push((
                    line,
                    header
                        .iter()
                        .cloned()
                        .zip(r.iter().map(str::to_string))
                        .collect(),
                )),
                Err(e) => self
                    .schema_errors
                    .push(format!("{}:{line}: {e}", schema.name)),
            }
        }
        Ok(Some(out))
    }

    fn number(&mut self, file: &str, line: usize, row: &Row, col: &str) -> Option<f64> {
        let raw = row.get(col).map(String::as_str).unwrap_or("");
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.schema_errors.push(format!(
                    "{file}:{line}: column {col}: {raw:?} is not a finite number"
                ));
                None
            }
        }
    }

    fn optional_number(
        &mut self,
        file: &str,
        line: usize,
        row: &Row,
        col: &str,
    ) -> Option<Option<f64>> {
        if row.get(col).is_none_or(|v| v.is_empty()) {
            return Some(None);
        }
        self.number(file, line, row, col).map(Some)
    }

    fn date(&mut self, file: &str, line: usize, row: &Row) -> Option<NaiveDate> {
        match parse_date(row.get("date").map(String::as_str).unwrap_or("")) {
            Ok(d) => Some(d),
            Err(e) => {
                self.schema_errors.push(format!("{file}:{line}: {e}"));
                None
            }
        }
    }

    /// Collects an hourly file into per-key grids.
    fn hourly<K: Ord + Clone + Display>(
        &mut self,
        ds: &Dataset,
        schema: &FileSchema,
        value_col: &str,
        sparse: bool,
        key: impl Fn(&Row) -> K,
    ) -> Result<BTreeMap<K, DayGrid>, BundleError> {
        let Some(rows) = self.rows(schema)? else {
            return Ok(BTreeMap::new());
        };
        let mut acc: BTreeMap<K, BTreeMap<(i64, usize), (f64, usize)>> = BTreeMap::new();
        for (line, row) in rows {
            let raw = row.get("timestamp").cloned().unwrap_or_default();
            let Some(ts) = parse_timestamp(&raw) else {
                self.schema_errors
                    .push(format!("{}:{line}: bad timestamp {raw:?}", schema.name));
                continue;
            };
            let Some(v) = self.number(schema.name, line, &row, value_col) else {
                continue;
            };
            let slot = (ds.day_of(ts.date()), ts.hour() as usize);
            let e = acc
                .entry(key(&row))
                .or_default()
                .entry(slot)
                .or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        let mut out = BTreeMap::new();
        for (k, cells) in acc {
            match densify(&cells, sparse) {
                Ok(g) => {
                    out.insert(k, g);
                }
                Err(msg) => self
                    .coverage_errors
                    .push(format!("{} [{k}]: {msg}", schema.name)),
            }
        }
        Ok(out)
    }
}

/// Averages repeated hours and fills missing ones: zeros for sparse files,
/// linear interpolation over short gaps otherwise.
fn densify(cells: &BTreeMap<(i64, usize), (f64, usize)>, sparse: bool) -> Result<DayGrid, String> {
    let first = cells.keys().next().map_or(0, |k| k.0);
    let last = cells.keys().next_back().map_or(-1, |k| k.0);
    let n = ((last - first + 1) * 24) as usize;
    let mut flat: Vec<Option<f64>> = vec![None; n];
    for (&(d, h), &(s, c)) in cells {
        flat[(d - first) as usize * 24 + h] = Some(s / c as f64);
    }
    if sparse {
        let values = flat
            .chunks(24)
            .map(|c| std::array::from_fn(|h| c[h].unwrap_or(0.0)))
            .collect();
        return Ok(DayGrid::new(first, values));
    }
    let mut filled = vec![0.0; n];
    let mut i = 0;
    while i < n {
        if let Some(v) = flat[i] {
            filled[i] = v;
            i += 1;
            continue;
        }
        let start = i;
        while i < n && flat[i].is_none() {
            i += 1;
        }
        let len = i - start;
        if len > MAX_GAP_HOURS {
            return Err(format!(
                "gap of {len} hours from day {} hour {}",
                first + (start / 24) as i64,
                start % 24 + 1
            ));
        }
        let before = (start > 0).then(|| filled[start - 1]);
        let after = flat.get(i).copied().flatten();
        for (k, slot) in filled[start..i].iter_mut().enumerate() {
            *slot = match (before, after) {
                (Some(a), Some(b)) => a + (b - a) * (k + 1) as f64 / (len + 1) as f64,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => 0.0,
            };
        }
    }
    let values = filled
        .chunks(24)
        .map(|c| std::array::from_fn(|h| c[h]))
        .collect();
    Ok(DayGrid::new(first, values))
}

fn col(row: &Row, name: &str) -> String {
    row.get(name).cloned().unwrap_or_default()
}

/// Reads and validates a bundle directory. Every schema violation is
/// reported together.
pub fn read_bundle(dir: &Path) -> Result<Ingested, BundleError> {
    let mut r = Reader {
        dir: dir.to_path_buf(),
        schema_errors: Vec::new(),
        coverage_errors: Vec::new(),
        warnings: Vec::new(),
    };
    let mut ds = Dataset::default();

    ds.load_actual = r.hourly(&ds, &LOAD_ACTUAL, "load_mw", false, |row| col(row, "zone"))?;
    ds.load_tso = r.hourly(&ds, &LOAD_TSO, "load_mw", false, |row| col(row, "zone"))?;
    ds.zones = ds.load_actual.keys().cloned().collect();
    for z in ds.load_tso.keys() {
        if !ds.load_actual.contains_key(z) {
            r.schema_errors
                .push(format!("{}: zone {z} has no actual load", LOAD_TSO.name));
        }
    }
    ds.res_profile = r.hourly(&ds, &RES_FORECAST, "profile_pu", false, |row| {
        col(row, "cluster")
    })?;
    ds.outages = r.hourly(&ds, &OUTAGES, "outage_mw", true, |row| col(row, "cluster"))?;
    ds.chp = r.hourly(&ds, &CHP, "chp_mw", false, |row| col(row, "zone"))?;
    ds.ntc = r
        .hourly(&ds, &NTC, "ntc_mw", false, |row| {
            format!("{}>{}", col(row, "from_zone"), col(row, "to_zone"))
        })?
        .into_iter()
        .map(|(k, g)| {
            let (a, b) = k.split_once('>').expect("key built with a separator");
            ((a.to_string(), b.to_string()), g)
        })
        .collect();
    ds.wind = r.hourly(&ds, &WIND, "wind_mw", false, |row| col(row, "zone"))?;
    ds.prices = r.hourly(&ds, &PRICES, "price_eur_per_mwh", false, |row| {
        col(row, "zone")
    })?;

    if let Some(rows) = r.rows(&CLUSTERS)? {
        let mut seen = BTreeSet::new();
        for (line, row) in rows {
            let f = CLUSTERS.name;
            let id = col(&row, "cluster");
            if !seen.insert(id.clone()) {
                r.schema_errors
                    .push(format!("{f}:{line}: duplicate cluster {id}"));
            }
            let Some(kind) = ClusterKindTag::parse(&col(&row, "kind")) else {
                r.schema_errors
                    .push(format!("{f}:{line}: unknown kind {:?}", col(&row, "kind")));
                continue;
            };
            let mut c = ClusterSpec::new(&id, &col(&row, "zone"), kind, 0.0);
            let (
                Some(cap),
                Some(af),
                Some(vcf),
                Some(vcm),
                Some(ef),
                Some(em),
                Some(co2),
                Some(gmin),
                Some(sc),
                Some(eta),
                Some(cer),
            ) = (
                r.number(f, line, &row, "cap_mw"),
                r.optional_number(f, line, &row, "availability_pu"),
                r.optional_number(f, line, &row, "vc_full_eur_per_mwh"),
                r.optional_number(f, line, &row, "vc_minload_eur_per_mwh"),
                r.optional_number(f, line, &row, "eff_full_pu"),
                r.optional_number(f, line, &row, "eff_minload_pu"),
                r.optional_number(f, line, &row, "co2_t_per_mwh_fuel"),
                r.optional_number(f, line, &row, "g_min_pu"),
                r.optional_number(f, line, &row, "startup_eur_per_mw"),
                r.optional_number(f, line, &row, "storage_efficiency_pu"),
                r.optional_number(f, line, &row, "cer_per_h"),
            )
            else {
                continue;
            };
            c.cap_mw = cap;
            c.availability = af.unwrap_or(1.0);
            c.vc_full = vcf;
            c.vc_minload = vcm;
            let fuel = col(&row, "fuel");
            c.fuel = (!fuel.is_empty()).then_some(fuel);
            c.eff_full = ef;
            c.eff_minload = em;
            c.co2_factor = co2.unwrap_or(0.0);
            c.g_min = gmin.unwrap_or(0.0);
            c.startup_cost = sc.unwrap_or(0.0);
            c.storage_efficiency = eta;
            c.cer = cer;
            if !ds.zones.contains(&c.zone) {
                r.schema_errors.push(format!(
                    "{f}:{line}: cluster {id} in unknown zone {}",
                    c.zone
                ));
            }
            if cap < 0.0 || !(0.0..=1.0).contains(&c.availability) || !(0.0..1.0).contains(&c.g_min)
            {
                r.schema_errors.push(format!("{f}:{line}: cluster {id} needs cap >= 0, availability in [0, 1], g_min in [0, 1)"));
            }
            match kind {
                ClusterKindTag::Thermal
                    if c.vc_full.is_none() && (c.fuel.is_none() || c.eff_full.is_none()) =>
                {
                    r.schema_errors.push(format!(
                        "{f}:{line}: thermal cluster {id} needs vc_full or fuel and eff_full"
                    ));
                }
                ClusterKindTag::StorageMid if c.storage_efficiency.is_none() || c.cer.is_none() => {
                    r.schema_errors.push(format!(
                        "{f}:{line}: storage cluster {id} needs efficiency and cer"
                    ));
                }
                _ => {}
            }
            ds.clusters.push(c);
        }
    }

    if let Some(rows) = r.rows(&FUEL_PRICES)? {
        for (line, row) in rows {
            let (Some(d), Some(v)) = (
                r.date(FUEL_PRICES.name, line, &row),
                r.number(FUEL_PRICES.name, line, &row, "price_eur_per_unit"),
            ) else {
                continue;
            };
            let day = ds.day_of(d);
            ds.fuel_prices
                .entry(col(&row, "fuel"))
                .or_default()
                .insert(day, v);
        }
    }
    for c in &ds.clusters {
        if let (Some(fuel), None) = (&c.fuel, c.vc_full) {
            if !ds.fuel_prices.contains_key(fuel) {
                r.schema_errors.push(format!(
                    "{}: cluster {} uses fuel {fuel} without prices",
                    CLUSTERS.name, c.id
                ));
            }
        }
    }

    if let Some(rows) = r.rows(&RESERVES)? {
        for (line, row) in rows {
            let f = RESERVES.name;
            let (Some(d), Some(p), Some(sp), Some(sn)) = (
                r.date(f, line, &row),
                r.number(f, line, &row, "primary_mw"),
                r.number(f, line, &row, "secondary_pos_mw"),
                r.number(f, line, &row, "secondary_neg_mw"),
            ) else {
                continue;
            };
            let day = ReserveDay {
                primary: p,
                secondary_pos: sp,
                secondary_neg: sn,
            };
            let d = ds.day_of(d);
            ds.reserves
                .entry(col(&row, "zone"))
                .or_default()
                .insert(d, day);
        }
    }

    if let Some(rows) = r.rows(&WATER_VALUES)? {
        let mut steps: BTreeMap<String, BTreeMap<i64, BTreeMap<u32, (f64, f64)>>> = BTreeMap::new();
        for (line, row) in rows {
            let f = WATER_VALUES.name;
            let (Some(d), Some(cap), Some(wv)) = (
                r.date(f, line, &row),
                r.number(f, line, &row, "capacity_mw"),
                r.number(f, line, &row, "water_value_eur_per_mwh"),
            ) else {
                continue;
            };
            let Ok(step) = col(&row, "step").parse::<u32>() else {
                r.schema_errors
                    .push(format!("{f}:{line}: step must be a non-negative integer"));
                continue;
            };
            steps
                .entry(col(&row, "cluster"))
                .or_default()
                .entry(ds.day_of(d))
                .or_default()
                .insert(step, (cap, wv));
        }
        ds.water_values = steps
            .into_iter()
            .map(|(c, days)| {
                (
                    c,
                    days.into_iter()
                        .map(|(d, s)| (d, s.into_values().collect()))
                        .collect(),
                )
            })
            .collect();
    }

    if let Some(rows) = r.rows(&HOLIDAYS)? {
        for (line, row) in rows {
            if let Some(d) = r.date(HOLIDAYS.name, line, &row) {
                let d = ds.day_of(d);
                ds.holidays.entry(col(&row, "zone")).or_default().insert(d);
            }
        }
    }

    for c in &ds.clusters {
        let needs_profile =
            c.kind == ClusterKindTag::Renewable && !ds.res_profile.contains_key(&c.id);
        let needs_values = matches!(
            c.kind,
            ClusterKindTag::StorageLong | ClusterKindTag::HydroReservoir
        ) && !ds.water_values.contains_key(&c.id);
        if needs_profile {
            r.schema_errors.push(format!(
                "{}: renewable cluster {} has no profile",
                RES_FORECAST.name, c.id
            ));
        }
        if needs_values {
            r.schema_errors.push(format!(
                "{}: cluster {} has no water values",
                WATER_VALUES.name, c.id
            ));
        }
    }
    for (a, b) in ds.ntc.keys() {
        if !ds.zones.contains(a) || !ds.zones.contains(b) {
            r.schema_errors
                .push(format!("{}: link {a}->{b} names an unknown zone", NTC.name));
        }
    }

    if !r.schema_errors.is_empty() {
        return Err(BundleError::Schema(r.schema_errors));
    }
    if !r.coverage_errors.is_empty() {
        return Err(BundleError::Coverage(r.coverage_errors));
    }
    Ok(Ingested {
        dataset: ds,
        warnings: r.warnings,
    })
}

fn write_csv(
    dir: &Path,
    schema: &FileSchema,
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), BundleError> {
    let path = dir.join(schema.name);
    let mut w = csv::Writer::from_path(&path).map_err(|source| BundleError::Csv {
        path: path.clone(),
        source,
    })?;
    let err = |source| BundleError::Csv {
        path: path.clone(),
        source,
    };
    w.write_record(schema.columns).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|source| BundleError::Io {
        path: path.clone(),
        source,
    })
}

fn hourly_rows<'a, K: 'a>(
    ds: &'a Dataset,
    grids: impl IntoIterator<Item = (K, &'a DayGrid)> + 'a,
    keys: impl Fn(&K) -> Vec<String> + 'a,
) -> impl Iterator<Item = Vec<String>> + 'a {
    grids.into_iter().flat_map(move |(k, g)| {
        let key = keys(&k);
        (g.first_day..=g.last_day())
            .flat_map(move |d| (0..24).map(move |h| (d, h)))
            .map(move |(d, h)| {
                let mut row = vec![format!("{}T{h:02}:00", ds.date(d))];
                row.extend(key.iter().cloned());
                row.push(g.day(d).expect("in range")[h].to_string());
                row
            })
            .collect::<Vec<_>>()
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `ds` as a bundle that `read_bundle` reads back unchanged.
pub fn write_bundle(ds: &Dataset, dir: &Path) -> Result<(), BundleError> {
    fs::create_dir_all(dir).map_err(|source| BundleError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    fn by_name(m: &BTreeMap<String, DayGrid>) -> Vec<(String, &DayGrid)> {
        m.iter().map(|(k, g)| (k.clone(), g)).collect()
    }
    write_csv(
        dir,
        &LOAD_ACTUAL,
        hourly_rows(ds, by_name(&ds.load_actual), |k| vec![k.clone()]),
    )?;
    write_csv(
        dir,
        &LOAD_TSO,
        hourly_rows(ds, by_name(&ds.load_tso), |k| vec![k.clone()]),
    )?;
    write_csv(
        dir,
        &RES_FORECAST,
        hourly_rows(ds, by_name(&ds.res_profile), |k| vec![k.clone()]),
    )?;
    write_csv(
        dir,
        &OUTAGES,
        hourly_rows(ds, by_name(&ds.outages), |k| vec![k.clone()]),
    )?;
    write_csv(
        dir,
        &CHP,
        hourly_rows(ds, by_name(&ds.chp), |k| vec![k.clone()]),
    )?;
    write_csv(
        dir,
        &NTC,
        hourly_rows(ds, ds.ntc.iter().map(|(k, g)| (k.clone(), g)), |k| {
            vec![k.0.clone(), k.1.clone()]
        }),
    )?;
    write_csv(
        dir,
        &WIND,
        hourly_rows(ds, by_name(&ds.wind), |k| vec![k.clone()]),
    )?;
    write_csv(
        dir,
        &PRICES,
        hourly_rows(ds, by_name(&ds.prices), |k| vec![k.clone()]),
    )?;
    write_csv(
        dir,
        &CLUSTERS,
        ds.clusters.iter().map(|c| {
            vec![
                c.id.clone(),
                c.zone.clone(),
                c.kind.name().to_string(),
                c.cap_mw.to_string(),
                c.availability.to_string(),
                opt(c.vc_full),
                opt(c.vc_minload),
                c.fuel.clone().unwrap_or_default(),
                opt(c.eff_full),
                opt(c.eff_minload),
                c.co2_factor.to_string(),
                c.g_min.to_string(),
                c.startup_cost.to_string(),
                opt(c.storage_efficiency),
                opt(c.cer),
            ]
        }),
    )?;
    write_csv(
        dir,
        &FUEL_PRICES,
        ds.fuel_prices.iter().flat_map(|(f, days)| {
            days.iter()
                .map(move |(d, v)| vec![ds.date(*d).to_string(), f.clone(), v.to_string()])
        }),
    )?;
    write_csv(
        dir,
        &RESERVES,
        ds.reserves.iter().flat_map(|(z, days)| {
            days.iter().map(move |(d, r)| {
                vec![
                    ds.date(*d).to_string(),
                    z.clone(),
                    r.primary.to_string(),
                    r.secondary_pos.to_string(),
                    r.secondary_neg.to_string(),
                ]
            })
        }),
    )?;
    write_csv(
        dir,
        &WATER_VALUES,
        ds.water_values.iter().flat_map(|(c, days)| {
            days.iter().flat_map(move |(d, steps)| {
                steps.iter().enumerate().map(move |(k, (cap, wv))| {
                    vec![
                        ds.date(*d).to_string(),
                        c.clone(),
                        k.to_string(),
                        cap.to_string(),
                        wv.to_string(),
                    ]
                })
            })
        }),
    )?;
    write_csv(
        dir,
        &HOLIDAYS,
        ds.holidays.iter().flat_map(|(z, days)| {
            days.iter()
                .map(move |d| vec![ds.date(*d).to_string(), z.clone(), "holiday".into()])
        }),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(entries: &[((i64, usize), f64)]) -> BTreeMap<(i64, usize), (f64, usize)> {
        let mut m: BTreeMap<(i64, usize), (f64, usize)> = BTreeMap::new();
        for &(k, v) in entries {
            let e = m.entry(k).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        m
    }

    #[test]
    fn repeated_hour_is_averaged() {
        let mut e: Vec<((i64, usize), f64)> = (0..24).map(|h| ((0, h), 10.0)).collect();
        e.push(((0, 2), 20.0));
        let g = densify(&cells(&e), false).unwrap();
        assert_eq!(g.values.len(), 1);
        assert_eq!(g.values[0][2], 15.0);
    }

    #[test]
    fn skipped_hour_is_interpolated() {
        let e: Vec<((i64, usize), f64)> = (0..24)
            .filter(|&h| h != 2)
            .map(|h| ((0, h), h as f64))
            .collect();
        let g = densify(&cells(&e), false).unwrap();
        assert_eq!(g.values[0][2], 2.0);
    }

    #[test]
    fn long_gap_is_a_coverage_error() {
        let e: Vec<((i64, usize), f64)> = (0..24)
            .filter(|&h| !(5..9).contains(&h))
            .map(|h| ((0, h), 1.0))
            .collect();
        assert!(densify(&cells(&e), false).is_err());
        let three: Vec<((i64, usize), f64)> = (0..24)
            .filter(|&h| !(5..8).contains(&h))
            .map(|h| ((0, h), 1.0))
            .collect();
        assert!(densify(&cells(&three), false).is_ok());
    }

    #[test]
    fn sparse_files_fill_with_zero() {
        let g = densify(&cells(&[((3, 5), 7.0)]), true).unwrap();
        assert_eq!(g.first_day, 3);
        assert_eq!(g.values[0][5], 7.0);
        assert_eq!(g.values[0].iter().sum::<f64>(), 7.0);
    }
}
