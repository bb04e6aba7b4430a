//! The rolling daily loop over all stages, with per-day caching in the run
//! directory.
//!
//! A stage-day is reused when the manifest marks it ok, its files exist and
//! its fingerprint matches: the configuration, the bundle contents and the
//! digests of the upstream results it consumed. Recomputing a day that turns
//! out identical therefore leaves later days cached.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::bundle::{read_bundle, BundleError, ALL_FILES, PRICES};
use crate::config::{ConfigError, Mode, PipelineConfig};
use crate::dataset::{Dataset, DayGrid};
use crate::report::{evaluate, Summary};
use crate::stages::{
    density, dispatch, focal_demand, forecast, panel_lookback, preprocess, sub_models, Context,
    DensityStage, DispatchStage, ForecastStage, LoadStage, StageError, SubModelStage,
};
use crate::store::{
    combine_digests, sha256_hex, write_price_csv, write_probabilistic_csv, DayStatus, Manifest,
    Stage, StageRecord, Status, Store, StoreError,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("data do not cover the requested run:\n  {}", .0.join("\n  "))]
    Coverage(Vec<String>),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Bundle(_) | RunError::Coverage(_) => 3,
            RunError::Store(_) | RunError::Pool(_) => 1,
        }
    }
}

/// Last stage to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Until {
    Preprocess,
    Density,
    Dispatch,
    Postprocess,
    Evaluate,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub requested_days: usize,
    pub failed_days: usize,
    /// Stage-days computed in this run rather than read back.
    pub computed: BTreeMap<Stage, Vec<NaiveDate>>,
    pub summary: Option<Summary>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    /// 2 when more than half of the requested days failed, else 0.
    pub fn exit_code(&self) -> i32 {
        if 2 * self.failed_days > self.requested_days {
            2
        } else {
            0
        }
    }
}

/// Digests of the bundle: every file except the actual prices, and the
/// prices alone. Prices feed only the post-processing stages.
pub fn bundle_hashes(dir: &Path) -> Result<(String, String), RunError> {
    let read = |name: &str| -> Result<Vec<u8>, RunError> {
        let path = dir.join(name);
        if !path.exists() {
            return Ok(Vec::new());
        }
        fs::read(&path).map_err(|e| {
            RunError::Store(StoreError {
                path,
                message: e.to_string(),
            })
        })
    };
    let mut inputs = Vec::new();
    for f in ALL_FILES.iter().filter(|f| f.name != PRICES.name) {
        inputs.push(f.name.to_string());
        inputs.push(sha256_hex(&read(f.name)?));
    }
    let inputs = combine_digests(inputs.iter().map(String::as_str));
    Ok((inputs, sha256_hex(&read(PRICES.name)?)))
}

/// Day ranges of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plan {
    pub eval: (i64, i64),
    pub sub_models: (i64, i64),
    pub dispatch: (i64, i64),
}

impl Plan {
    pub fn new(cfg: &PipelineConfig, ds: &Dataset) -> Self {
        let e0 = ds.day_of(cfg.eval_start);
        let e1 = ds.day_of(cfg.eval_end);
        Plan {
            eval: (e0, e1),
            sub_models: (e0 - cfg.windows.qra_days as i64, e1),
            dispatch: (e0 - panel_lookback(cfg), e1),
        }
    }
}

fn check_coverage(ctx: &Context, plan: &Plan) -> Result<(), RunError> {
    let ds = ctx.ds;
    let cfg = ctx.cfg;
    let z = &cfg.focal_zone;
    let mut errs = Vec::new();
    let mut need = |what: &str, g: Option<&DayGrid>, first: i64, last: i64| match g {
        None => errs.push(format!("no {what}")),
        Some(g) if !g.covers(first, last) => errs.push(format!(
            "{what} covers {} ..= {}, the run needs {} ..= {}",
            ds.date(g.first_day),
            ds.date(g.last_day()),
            ds.date(first),
            ds.date(last)
        )),
        Some(_) => {}
    };
    let (p0, e1) = plan.dispatch;
    if ds.zone_index(z).is_none() {
        return Err(RunError::Coverage(vec![format!(
            "focal zone {z} is not in the bundle"
        )]));
    }
    match cfg.mode {
        Mode::Full => {
            let back = ctx.load_lookback();
            need(
                &format!("actual load of {z}"),
                ds.load_actual.get(z),
                p0 - back,
                e1 - 2,
            );
            need(
                &format!("TSO load forecast of {z}"),
                ds.load_tso.get(z),
                p0 - back,
                e1,
            );
        }
        Mode::DispatchOnly => need(
            &format!("TSO load forecast of {z}"),
            ds.load_tso.get(z),
            p0 - 7,
            e1,
        ),
    }
    for other in ds.zones.iter().filter(|o| *o != z) {
        need(
            &format!("actual load of {other}"),
            ds.load_actual.get(other),
            p0 - 8,
            e1 - 6,
        );
    }
    need(
        &format!("actual prices of {z}"),
        ds.prices.get(z),
        p0,
        e1 - 1,
    );
    need(&format!("wind forecast of {z}"), ds.wind.get(z), p0, e1);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(RunError::Coverage(errs))
    }
}

struct Done<T> {
    day: i64,
    value: Option<T>,
    record: StageRecord,
    fresh: bool,
}

type Results<T> = BTreeMap<i64, (T, String)>;

struct Runner<'a> {
    ctx: Context<'a>,
    store: Store,
    manifest: Manifest,
    pool: rayon::ThreadPool,
    base: String,
    prices_hash: String,
    computed: BTreeMap<Stage, Vec<NaiveDate>>,
}

impl Runner<'_> {
    fn cached<T: DeserializeOwned>(
        &self,
        stage: Stage,
        date: NaiveDate,
        fingerprint: &str,
    ) -> Option<(T, StageRecord)> {
        let rec = self.manifest.record(stage, date)?;
        if rec.status != Status::Ok
            || rec.fingerprint != fingerprint
            || !rec.files.iter().all(|f| self.store.exists(f))
        {
            return None;
        }
        let value = self.store.read_json(&Store::stage_file(stage, date)).ok()?;
        Some((value, rec.clone()))
    }

    fn one<T, F, X>(
        &self,
        stage: Stage,
        day: i64,
        fingerprint: String,
        compute: F,
        extra: X,
    ) -> Done<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<(T, Vec<String>), StageError>,
        X: Fn(&T, NaiveDate) -> Result<Vec<String>, StoreError>,
    {
        let date = self.ctx.ds.date(day);
        if let Some((value, record)) = self.cached(stage, date, &fingerprint) {
            return Done {
                day,
                value: Some(value),
                record,
                fresh: false,
            };
        }
        let started = Instant::now();
        let mut record = StageRecord {
            status: Status::Failed,
            seconds: 0.0,
            fingerprint,
            digest: None,
            files: Vec::new(),
            message: None,
            warnings: Vec::new(),
        };
        let value = match compute() {
            Ok((value, warnings)) => {
                record.warnings = warnings;
                let rel = Store::stage_file(stage, date);
                let written = self
                    .store
                    .write_json(&rel, &value)
                    .and_then(|digest| extra(&value, date).map(|more| (digest, more)));
                match written {
                    Ok((digest, more)) => {
                        record.status = Status::Ok;
                        record.digest = Some(digest);
                        record.files = std::iter::once(rel).chain(more).collect();
                        Some(value)
                    }
                    Err(e) => {
                        record.message = Some(e.to_string());
                        None
                    }
                }
            }
            Err(e) => {
                record.message = Some(e.to_string());
                None
            }
        };
        record.seconds = started.elapsed().as_secs_f64();
        if let Some(m) = &record.message {
            log::warn!("{} {date}: {m}", stage.dir());
        }
        Done {
            day,
            value,
            record,
            fresh: true,
        }
    }

    fn absorb<T>(&mut self, stage: Stage, done: Done<T>, out: &mut Results<T>) {
        let date = self.ctx.ds.date(done.day);
        if done.fresh {
            self.computed.entry(stage).or_default().push(date);
        }
        if let (Some(v), Some(d)) = (done.value, done.record.digest.clone()) {
            out.insert(done.day, (v, d));
        }
        self.manifest
            .stages
            .entry(stage)
            .or_default()
            .insert(date, done.record);
    }

    /// Runs independent stage-days on the worker pool; results are merged
    /// in day order.
    fn parallel<T, F, P, X>(
        &mut self,
        stage: Stage,
        days: Vec<i64>,
        fingerprint: P,
        compute: F,
        extra: X,
    ) -> Result<Results<T>, StoreError>
    where
        T: Serialize + DeserializeOwned + Send,
        F: Fn(i64) -> Result<(T, Vec<String>), StageError> + Sync,
        P: Fn(i64) -> String + Sync,
        X: Fn(&T, NaiveDate) -> Result<Vec<String>, StoreError> + Sync,
    {
        log::info!("{}: {} days", stage.dir(), days.len());
        let this = &*self;
        let done: Vec<Done<T>> = this.pool.install(|| {
            days.par_iter()
                .map(|&d| this.one(stage, d, fingerprint(d), || compute(d), &extra))
                .collect()
        });
        let mut out = BTreeMap::new();
        for d in done {
            self.absorb(stage, d, &mut out);
        }
        self.store.write_manifest(&self.manifest)?;
        Ok(out)
    }
}

fn no_extra<T>(_: &T, _: NaiveDate) -> Result<Vec<String>, StoreError> {
    Ok(Vec::new())
}

fn digest_of<T>(r: &Results<T>, day: i64) -> &str {
    r.get(&day).map_or("-", |(_, d)| d.as_str())
}

/// Reads and validates the config's bundle, then runs.
pub fn run(cfg: &PipelineConfig, until: Until) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let ingested = read_bundle(&cfg.bundle)?;
    for w in &ingested.warnings {
        log::warn!("{w}");
    }
    let (inputs, prices) = bundle_hashes(&cfg.bundle)?;
    let mut out = run_dataset(cfg, &ingested.dataset, &inputs, &prices, until)?;
    out.warnings.splice(0..0, ingested.warnings);
    Ok(out)
}

/// Runs on an already loaded dataset. `inputs_hash` and `prices_hash`
/// identify its contents for caching.
pub fn run_dataset(
    cfg: &PipelineConfig,
    ds: &Dataset,
    inputs_hash: &str,
    prices_hash: &str,
    until: Until,
) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let ctx = Context::new(ds, cfg);
    let plan = Plan::new(cfg, ds);
    check_coverage(&ctx, &plan)?;
    let store = Store::open(&cfg.run_dir)?;
    let config_hash = cfg.hash();
    let mut manifest = store.read_manifest();
    if manifest.config_hash != config_hash {
        manifest = Manifest::default();
    }
    manifest.config_hash = config_hash.clone();
    manifest.inputs_hash = inputs_hash.to_string();
    manifest.prices_hash = prices_hash.to_string();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let mut r = Runner {
        ctx,
        store,
        manifest,
        pool,
        base: combine_digests([config_hash.as_str(), inputs_hash]),
        prices_hash: prices_hash.to_string(),
        computed: BTreeMap::new(),
    };
    let mut warnings = Vec::new();

    let dispatch_days: Vec<i64> = (plan.dispatch.0..=plan.dispatch.1).collect();
    let full = cfg.mode == Mode::Full;
    let mut loads: Results<LoadStage> = BTreeMap::new();
    let mut scen: Results<DensityStage> = BTreeMap::new();
    // stage closures get their own context since the runner is borrowed mutably
    if full {
        let base = r.base.clone();
        loads = {
            let ctxr = Context::new(ds, cfg);
            r.parallel(
                Stage::Preprocess,
                dispatch_days.clone(),
                |_| base.clone(),
                |d| preprocess(&ctxr, d).map(|v| (v, Vec::new())),
                no_extra,
            )?
        };
        if until >= Until::Density {
            let ctxr = Context::new(ds, cfg);
            let days = dispatch_days
                .iter()
                .copied()
                .filter(|d| loads.contains_key(d))
                .collect();
            scen = r.parallel(
                Stage::Density,
                days,
                |d| combine_digests([base.as_str(), digest_of(&loads, d)]),
                |d| density(&ctxr, &loads[&d].0).map(|v| (v, Vec::new())),
                no_extra,
            )?;
        }
    }

    let mut disp: Results<DispatchStage> = BTreeMap::new();
    if until >= Until::Dispatch {
        log::info!("dispatch: {} days", dispatch_days.len());
        let mut carried: Option<Vec<f64>> = None;
        for &day in &dispatch_days {
            let online = serde_json::to_string(&carried).expect("serialises");
            let fp = combine_digests([
                r.base.as_str(),
                digest_of(&loads, day),
                digest_of(&scen, day),
                online.as_str(),
            ]);
            let stages = loads
                .get(&day)
                .zip(scen.get(&day))
                .map(|(l, s)| (&l.0, &s.0));
            let done = r.one(
                Stage::Dispatch,
                day,
                fp,
                || {
                    let focal = focal_demand(&r.ctx, day, stages)?;
                    dispatch(&r.ctx, day, &focal, carried.as_deref()).map(|v| (v, Vec::new()))
                },
                no_extra,
            );
            carried = done.value.as_ref().map(|v| v.terminal_online.clone());
            r.absorb(Stage::Dispatch, done, &mut disp);
        }
        r.store.write_manifest(&r.manifest)?;
    }

    let mut forecasts: Results<ForecastStage> = BTreeMap::new();
    if until >= Until::Postprocess {
        let focal = cfg.focal_zone.clone();
        let price_of = |t: i64| {
            disp.get(&t)
                .and_then(|(s, _)| s.zone_prices(&focal).copied())
        };
        let p0 = plan.dispatch.0;
        let ctxr = Context::new(ds, cfg);
        let base = combine_digests([r.base.as_str(), r.prices_hash.as_str()]);
        let subs: Results<SubModelStage> = r.parallel(
            Stage::SubModels,
            (plan.sub_models.0..=plan.sub_models.1).collect(),
            |t| {
                combine_digests(
                    std::iter::once(base.as_str()).chain((p0..=t).map(|k| digest_of(&disp, k))),
                )
            },
            |t| {
                sub_models(&ctxr, t, p0, &price_of).map(|s| {
                    let w = match s.zero_filled_days {
                        0 => Vec::new(),
                        n => vec![format!(
                            "{n} days without a dispatch price counted as zero error"
                        )],
                    };
                    (s, w)
                })
            },
            no_extra,
        )?;
        let q = cfg.windows.qra_days as i64;
        let history = |t: i64| subs.get(&t).map(|(s, _)| s.clone());
        let store = r.store.clone();
        forecasts = r.parallel(
            Stage::Postprocess,
            (plan.eval.0..=plan.eval.1).collect(),
            |d| {
                combine_digests(
                    std::iter::once(base.as_str()).chain((d - q..=d).map(|k| digest_of(&subs, k))),
                )
            },
            |d| {
                let today = subs
                    .get(&d)
                    .map(|(s, _)| s)
                    .ok_or_else(|| StageError::Data("sub-model forecasts unavailable".into()))?;
                forecast(&ctxr, today, &history).map(|f| {
                    let missing = q as usize - f.training_days;
                    let w = if missing > 0 {
                        vec![format!(
                            "{missing} training days without sub-model forecasts skipped"
                        )]
                    } else {
                        Vec::new()
                    };
                    (f, w)
                })
            },
            |f: &ForecastStage, date| {
                Ok(vec![
                    write_price_csv(&store, date, f)?,
                    write_probabilistic_csv(&store, date, f)?,
                ])
            },
        )?;
    }

    // every requested day gets a status from its first failing stage
    let chain: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| match s {
            Stage::Preprocess => full,
            Stage::Density => full && until >= Until::Density,
            Stage::Dispatch => until >= Until::Dispatch,
            Stage::SubModels | Stage::Postprocess => until >= Until::Postprocess,
        })
        .collect();
    let mut failed_days = 0;
    for day in plan.eval.0..=plan.eval.1 {
        let date = ds.date(day);
        let failure = chain
            .iter()
            .find_map(|&s| match r.manifest.record(s, date) {
                Some(rec) if rec.status == Status::Ok => None,
                Some(rec) => Some((s, rec.message.clone())),
                None => Some((s, Some("not run".into()))),
            });
        failed_days += usize::from(failure.is_some());
        let status = match failure {
            Some((s, message)) => DayStatus {
                status: Status::Failed,
                failed_stage: Some(s),
                message,
            },
            None => DayStatus {
                status: Status::Ok,
                failed_stage: None,
                message: None,
            },
        };
        r.manifest.days.insert(date, status);
    }

    let mut summary = None;
    if until >= Until::Evaluate {
        let started = Instant::now();
        let list: Vec<ForecastStage> = forecasts.into_values().map(|(f, _)| f).collect();
        let ev = evaluate(&r.ctx, &r.store, &list)?;
        r.manifest.evaluation = Some(StageRecord {
            status: Status::Ok,
            seconds: started.elapsed().as_secs_f64(),
            fingerprint: String::new(),
            digest: None,
            files: ev.files.clone(),
            message: None,
            warnings: Vec::new(),
        });
        summary = Some(ev.summary);
    }

    let mut files: Vec<String> = r
        .manifest
        .stages
        .values()
        .flat_map(|m| m.values())
        .filter(|rec| rec.status == Status::Ok)
        .flat_map(|rec| rec.files.iter().cloned())
        .chain(
            r.manifest
                .evaluation
                .iter()
                .flat_map(|e| e.files.iter().cloned()),
        )
        .collect();
    files.sort();
    files.dedup();
    r.manifest.files = files;
    r.store.write_manifest(&r.manifest)?;
    for recs in r.manifest.stages.values() {
        for (date, rec) in recs {
            warnings.extend(rec.warnings.iter().map(|w| format!("{date}: {w}")));
        }
    }
    Ok(RunOutcome {
        requested_days: (plan.eval.1 - plan.eval.0 + 1) as usize,
        failed_days,
        computed: r.computed,
        summary,
        manifest: r.manifest,
        warnings,
    })
}
