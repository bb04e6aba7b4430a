//! Run configuration, read from TOML.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use epf_core::density::ScenarioWeights;
use epf_core::dispatch::ScenarioIndexing;
use epf_core::evaluation::DmNorm;
use epf_core::postproc::QUANTILE_GRID;
use epf_lp::SolverOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Load pre-processing, density forecast, dispatch and post-processing.
    #[default]
    Full,
    /// Dispatch on the raw TSO forecast; the third day repeats the forecast
    /// of a week earlier.
    DispatchOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Indexing {
    #[default]
    Shared,
    FullyIndexed,
}

impl From<Indexing> for ScenarioIndexing {
    fn from(i: Indexing) -> Self {
        match i {
            Indexing::Shared => ScenarioIndexing::Shared,
            Indexing::FullyIndexed => ScenarioIndexing::FullyIndexed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl From<Norm> for DmNorm {
    fn from(n: Norm) -> Self {
        match n {
            Norm::L1 => DmNorm::L1,
            Norm::L2 => DmNorm::L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Windows {
    /// Days of load history for the error profile, SARMA, SARMAX and the
    /// load quantile regressions.
    pub load_days: usize,
    /// Window lengths of the three sub-model pairs.
    pub postproc_weeks: Vec<usize>,
    /// Days of sub-model forecasts used to fit the price quantiles.
    pub qra_days: usize,
    /// Days of TSO forecasts fed to each two-day-ahead forecast.
    pub tso_history_days: usize,
}

impl Default for Windows {
    fn default() -> Self {
        Windows {
            load_days: 365,
            postproc_weeks: vec![44, 48, 52],
            qra_days: 365,
            tso_history_days: 56,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            feasibility_tol: o.feasibility_tol,
            optimality_tol: o.optimality_tol,
            max_iterations: o.max_iterations,
        }
    }
}

fn default_weights() -> [f64; 3] {
    ScenarioWeights::default().as_array()
}
fn default_voll() -> f64 {
    3000.0
}
fn default_curtc() -> f64 {
    20.0
}
fn default_grid() -> Vec<f64> {
    QUANTILE_GRID.to_vec()
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub bundle: PathBuf,
    pub run_dir: PathBuf,
    pub focal_zone: String,
    pub eval_start: NaiveDate,
    pub eval_end: NaiveDate,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub windows: Windows,
    /// Low, expected and high load scenario probabilities.
    #[serde(default = "default_weights")]
    pub scenario_weights: [f64; 3],
    #[serde(default)]
    pub scenario_indexing: Indexing,
    #[serde(default = "default_voll")]
    pub voll: f64,
    #[serde(default = "default_curtc")]
    pub curtc: f64,
    #[serde(default = "default_grid")]
    pub quantile_grid: Vec<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dm_norm: Norm,
}

impl PipelineConfig {
    pub fn new(
        bundle: PathBuf,
        run_dir: PathBuf,
        focal_zone: &str,
        eval_start: NaiveDate,
        eval_end: NaiveDate,
    ) -> Self {
        PipelineConfig {
            bundle,
            run_dir,
            focal_zone: focal_zone.into(),
            eval_start,
            eval_end,
            mode: Mode::default(),
            windows: Windows::default(),
            scenario_weights: default_weights(),
            scenario_indexing: Indexing::default(),
            voll: default_voll(),
            curtc: default_curtc(),
            quantile_grid: default_grid(),
            solver: SolverConfig::default(),
            workers: 1,
            seed: 0,
            dm_norm: Norm::default(),
        }
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.bundle, &mut cfg.run_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.eval_start > self.eval_end {
            errs.push(format!(
                "eval_start {} is after eval_end {}",
                self.eval_start, self.eval_end
            ));
        }
        if !self.weights().is_valid() {
            errs.push(format!(
                "scenario_weights {:?} must be non-negative and sum to 1",
                self.scenario_weights
            ));
        }
        let w = &self.windows;
        if w.load_days < 30 {
            errs.push("windows.load_days must be at least 30".into());
        }
        if w.postproc_weeks.len() != 3 || w.postproc_weeks.contains(&0) {
            errs.push("windows.postproc_weeks must hold three positive window lengths".into());
        }
        if w.qra_days == 0 {
            errs.push("windows.qra_days must be positive".into());
        }
        if w.tso_history_days < 8 {
            errs.push("windows.tso_history_days must be at least 8".into());
        }
        let grid_matches = self.quantile_grid.len() == QUANTILE_GRID.len()
            && self
                .quantile_grid
                .iter()
                .zip(QUANTILE_GRID)
                .all(|(a, b)| (a - b).abs() < 1e-12);
        if !grid_matches {
            errs.push("quantile_grid: only the 5 % grid 0.05, 0.10, ..., 0.95 is supported".into());
        }
        if !(self.voll > 0.0 && self.voll.is_finite())
            || !(self.curtc >= 0.0 && self.curtc.is_finite())
        {
            errs.push("voll must be positive and curtc non-negative".into());
        }
        if !(self.solver.feasibility_tol > 0.0 && self.solver.optimality_tol > 0.0) {
            errs.push("solver tolerances must be positive".into());
        }
        if self.workers == 0 {
            errs.push("workers must be at least 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    pub fn weights(&self) -> ScenarioWeights {
        let [low, expected, high] = self.scenario_weights;
        ScenarioWeights {
            low,
            expected,
            high,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            feasibility_tol: self.solver.feasibility_tol,
            optimality_tol: self.solver.optimality_tol,
            max_iterations: self.solver.max_iterations,
            ..SolverOptions::default()
        }
    }

    /// SHA-256 over every setting that affects results; paths and the worker
    /// count are left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        let obj = v.as_object_mut().expect("struct serialises to an object");
        // bundle contents are hashed separately, so its location does not matter
        obj.remove("bundle");
        obj.remove("run_dir");
        obj.remove("workers");
        let digest = Sha256::digest(serde_json::to_vec(&v).expect("value serialises"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PipelineConfig {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        PipelineConfig::new("b".into(), "r".into(), "A", d, d)
    }

    #[test]
    fn hash_ignores_locations_and_workers() {
        let a = sample();
        let mut b = a.clone();
        b.run_dir = "elsewhere".into();
        b.bundle = "moved/bundle".into();
        b.workers = 4;
        assert_eq!(a.hash(), b.hash());
        b.voll = 2000.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let a = sample();
        let back: PipelineConfig = toml::from_str(&a.to_toml()).unwrap();
        assert_eq!(a, back);
        let minimal: PipelineConfig = toml::from_str(
            "bundle = \"b\"\nrun_dir = \"r\"\nfocal_zone = \"A\"\neval_start = \"2020-01-01\"\neval_end = \"2020-01-01\"\n",
        )
        .unwrap();
        assert_eq!(minimal, a);
        assert!(toml::from_str::<PipelineConfig>("bogus = 1\n").is_err());
    }

    #[test]
    fn validation_collects_every_problem() {
        let mut c = sample();
        c.scenario_weights = [0.5, 0.5, 0.5];
        c.quantile_grid = vec![0.1, 0.5, 0.9];
        c.workers = 0;
        let Err(ConfigError::Invalid(errs)) = c.validate() else {
            panic!("expected invalid")
        };
        assert_eq!(errs.len(), 3);
        assert!(sample().validate().is_ok());
    }
}
