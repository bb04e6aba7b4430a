//! Run directory: the manifest, per-day stage files and output CSVs.
//!
//! Every file is written to a temporary name and renamed, so an interrupted
//! run never leaves a truncated file under a final name.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use epf_core::postproc::QUANTILE_GRID;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::stages::ForecastStage;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Preprocess,
    Density,
    Dispatch,
    SubModels,
    Postprocess,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Preprocess,
        Stage::Density,
        Stage::Dispatch,
        Stage::SubModels,
        Stage::Postprocess,
    ];

    pub fn dir(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Density => "density",
            Stage::Dispatch => "dispatch",
            Stage::SubModels => "submodels",
            Stage::Postprocess => "postproc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: Status,
    pub seconds: f64,
    /// Digest of everything the result depends on.
    pub fingerprint: String,
    /// Digest of the stage file; absent on failure.
    pub digest: Option<String>,
    pub files: Vec<String>,
    pub message: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayStatus {
    pub status: Status,
    pub failed_stage: Option<Stage>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub inputs_hash: String,
    pub prices_hash: String,
    pub stages: BTreeMap<Stage, BTreeMap<NaiveDate, StageRecord>>,
    /// Outcome of every requested evaluation day.
    pub days: BTreeMap<NaiveDate, DayStatus>,
    pub evaluation: Option<StageRecord>,
    /// Output files relative to the run directory.
    pub files: Vec<String>,
}

impl Manifest {
    pub fn record(&self, stage: Stage, date: NaiveDate) -> Option<&StageRecord> {
        self.stages.get(&stage)?.get(&date)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct StoreError {
    pub path: PathBuf,
    pub message: String,
}

fn store_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Digest over several parts, each length-prefixed.
pub fn combine_digests<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(root).map_err(|e| store_err(root, e))?;
        Ok(Store {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn abs(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.abs(rel).is_file()
    }

    pub fn stage_file(stage: Stage, date: NaiveDate) -> String {
        format!("{}/{date}.json", stage.dir())
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let path = self.abs(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| store_err(dir, e))?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| store_err(&tmp, e))?;
        f.write_all(bytes).map_err(|e| store_err(&tmp, e))?;
        f.sync_all().map_err(|e| store_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| store_err(&path, e))
    }

    /// Writes `value` as JSON and returns the digest of the bytes.
    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<String, StoreError> {
        let bytes = serde_json::to_vec_pretty(value).map_err(|e| store_err(&self.abs(rel), e))?;
        self.write(rel, &bytes)?;
        Ok(sha256_hex(&bytes))
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T, StoreError> {
        let path = self.abs(rel);
        let bytes = fs::read(&path).map_err(|e| store_err(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| store_err(&path, e))
    }

    pub fn read_manifest(&self) -> Manifest {
        self.read_json(MANIFEST).unwrap_or_default()
    }

    pub fn write_manifest(&self, m: &Manifest) -> Result<(), StoreError> {
        self.write_json(MANIFEST, m).map(|_| ())
    }

    pub fn write_csv(
        &self,
        rel: &str,
        header: &[String],
        rows: &[Vec<String>],
    ) -> Result<(), StoreError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.abs(rel);
        w.write_record(header).map_err(|e| store_err(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| store_err(&path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| store_err(&path, e))?;
        self.write(rel, &bytes)
    }
}

pub fn price_file(date: NaiveDate) -> String {
    format!("prices/{date}.csv")
}

pub fn probabilistic_file(date: NaiveDate) -> String {
    format!("probabilistic/{date}.csv")
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Hourly dispatch price and post-processed point forecast.
pub fn write_price_csv(
    store: &Store,
    date: NaiveDate,
    f: &ForecastStage,
) -> Result<String, StoreError> {
    let rel = price_file(date);
    let rows: Vec<Vec<String>> = (0..24)
        .map(|h| {
            vec![
                (h + 1).to_string(),
                f.dispatch[h].to_string(),
                f.point[h].to_string(),
            ]
        })
        .collect();
    store.write_csv(
        &rel,
        &strings(&["hour", "dispatch_eur_per_mwh", "forecast_eur_per_mwh"]),
        &rows,
    )?;
    Ok(rel)
}

/// Quantile grid and negative-price probability per hour.
pub fn write_probabilistic_csv(
    store: &Store,
    date: NaiveDate,
    f: &ForecastStage,
) -> Result<String, StoreError> {
    let rel = probabilistic_file(date);
    let mut header = vec!["hour".to_string()];
    header.extend(
        QUANTILE_GRID
            .iter()
            .map(|q| format!("q{:02}", (q * 100.0).round() as u32)),
    );
    header.push("neg_prob".into());
    let rows: Vec<Vec<String>> = (0..24)
        .map(|h| {
            let mut r = vec![(h + 1).to_string()];
            r.extend(f.quantiles[h].iter().map(f64::to_string));
            r.push(f.neg_prob[h].to_string());
            r
        })
        .collect();
    store.write_csv(&rel, &header, &rows)?;
    Ok(rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_floats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let v = vec![0.1 + 0.2, 1.0 / 3.0, -2.5e-300, 12345.678901234567];
        store.write_json("x/a.json", &v).unwrap();
        let back: Vec<f64> = store.read_json("x/a.json").unwrap();
        assert_eq!(v, back);
        assert!(!dir.path().join("x/a.tmp").exists());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.read_manifest(), Manifest::default());
        let mut m = Manifest {
            config_hash: "abc".into(),
            ..Manifest::default()
        };
        let date = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
        m.stages.entry(Stage::Dispatch).or_default().insert(
            date,
            StageRecord {
                status: Status::Ok,
                seconds: 0.5,
                fingerprint: "f".into(),
                digest: Some("d".into()),
                files: vec![Store::stage_file(Stage::Dispatch, date)],
                message: None,
                warnings: vec![],
            },
        );
        store.write_manifest(&m).unwrap();
        assert_eq!(store.read_manifest(), m);
    }

    #[test]
    fn digests_separate_parts() {
        assert_ne!(combine_digests(["ab", "c"]), combine_digests(["a", "bc"]));
    }
}
