use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use chrono::Days;
use epf_pipeline::bundle::{read_bundle, write_bundle, BundleError};
use epf_pipeline::config::{Mode, PipelineConfig};
use epf_pipeline::fixture::{generate, FixtureKind};
use epf_pipeline::run::{run, RunError, Until};
use epf_pipeline::store::{price_file, Stage};
use tempfile::TempDir;

/// The toy fixture is generated once and copied into each test's directory.
fn toy() -> &'static (TempDir, PipelineConfig) {
    static TOY: OnceLock<(TempDir, PipelineConfig)> = OnceLock::new();
    TOY.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = generate(FixtureKind::Toy, dir.path(), 7).unwrap();
        (dir, cfg)
    })
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Fresh copy of the toy fixture and a config pointing at it.
fn workspace() -> (TempDir, PipelineConfig) {
    let (src, _) = toy();
    let dir = tempfile::tempdir().unwrap();
    copy_dir(src.path(), dir.path());
    let cfg = PipelineConfig::load(&dir.path().join("config.toml")).unwrap();
    (dir, cfg)
}

fn computed(out: &epf_pipeline::run::RunOutcome, stage: Stage) -> usize {
    out.computed.get(&stage).map_or(0, Vec::len)
}

#[test]
fn toy_run_writes_forecasts_and_report() {
    let (_dir, cfg) = workspace();
    let out = run(&cfg, Until::Evaluate).unwrap();
    assert_eq!(out.requested_days, 10);
    assert_eq!(out.failed_days, 0);
    assert_eq!(out.exit_code(), 0);
    // the fixture left its dispatch results behind
    assert_eq!(computed(&out, Stage::Dispatch), 0);
    let mut date = cfg.eval_start;
    while date <= cfg.eval_end {
        assert!(cfg.run_dir.join(price_file(date)).is_file(), "{date}");
        assert!(cfg
            .run_dir
            .join(format!("probabilistic/{date}.csv"))
            .is_file());
        date = date + Days::new(1);
    }
    for f in [
        "point_metrics",
        "daily_errors",
        "coverage",
        "pinball",
        "interval_width_by_hour",
        "week_slots",
    ] {
        assert!(
            cfg.run_dir.join(format!("evaluation/{f}.csv")).is_file(),
            "{f}"
        );
    }
    let s = out.summary.unwrap();
    assert_eq!(s.hours, 240);
    assert!(s.rmse_forecast < s.rmse_dispatch, "{s:?}");

    let text = fs::read_to_string(cfg.run_dir.join(price_file(cfg.eval_start))).unwrap();
    assert!(text.starts_with("hour,dispatch_eur_per_mwh,forecast_eur_per_mwh\n"));
    assert_eq!(text.lines().count(), 25);
}

#[test]
fn rerun_recomputes_only_what_is_missing() {
    let (_dir, cfg) = workspace();
    run(&cfg, Until::Evaluate).unwrap();
    let again = run(&cfg, Until::Evaluate).unwrap();
    assert!(
        again.computed.values().all(Vec::is_empty),
        "{:?}",
        again.computed
    );

    let fifth = cfg.eval_start + Days::new(4);
    fs::remove_file(cfg.run_dir.join(price_file(fifth))).unwrap();
    let out = run(&cfg, Until::Evaluate).unwrap();
    assert_eq!(out.computed.get(&Stage::Postprocess), Some(&vec![fifth]));
    for stage in [
        Stage::Preprocess,
        Stage::Density,
        Stage::Dispatch,
        Stage::SubModels,
    ] {
        assert_eq!(computed(&out, stage), 0, "{stage:?}");
    }
    assert!(cfg.run_dir.join(price_file(fifth)).is_file());
}

#[test]
fn new_prices_leave_the_dispatch_cache_alone() {
    let (_dir, cfg) = workspace();
    run(&cfg, Until::Evaluate).unwrap();
    let prices = cfg.bundle.join("prices_actual.csv");
    let text = fs::read_to_string(&prices).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let last = lines.len() - 30;
    let mut cols: Vec<String> = lines[last].split(',').map(String::from).collect();
    let v: f64 = cols.last().unwrap().parse().unwrap();
    *cols.last_mut().unwrap() = (v + 1.0).to_string();
    lines[last] = cols.join(",");
    fs::write(&prices, lines.join("\n") + "\n").unwrap();

    let out = run(&cfg, Until::Evaluate).unwrap();
    for stage in [Stage::Preprocess, Stage::Density, Stage::Dispatch] {
        assert_eq!(computed(&out, stage), 0, "{stage:?}");
    }
    assert!(computed(&out, Stage::Postprocess) > 0);
}

#[test]
fn dispatch_only_mode_runs_without_load_models() {
    let (dir, mut cfg) = workspace();
    cfg.mode = Mode::DispatchOnly;
    cfg.run_dir = dir.path().join("run-dispatch-only");
    let out = run(&cfg, Until::Evaluate).unwrap();
    assert_eq!(out.failed_days, 0);
    assert_eq!(computed(&out, Stage::Preprocess), 0);
    assert_eq!(computed(&out, Stage::Density), 0);
    assert!(computed(&out, Stage::Dispatch) > 0);
    assert_eq!(computed(&out, Stage::Postprocess), 10);
}

#[test]
fn changed_settings_invalidate_the_cache() {
    let (_dir, mut cfg) = workspace();
    run(&cfg, Until::Dispatch).unwrap();
    cfg.voll = 2500.0;
    let out = run(&cfg, Until::Dispatch).unwrap();
    assert!(computed(&out, Stage::Dispatch) > 0);
}

#[test]
fn missing_interconnector_file_is_a_warning() {
    let (dir, _) = workspace();
    let bundle = dir.path().join("bundle");
    fs::remove_file(bundle.join("ntc.csv")).unwrap();
    let ing = read_bundle(&bundle).unwrap();
    assert!(
        ing.warnings.iter().any(|w| w.contains("ntc")),
        "{:?}",
        ing.warnings
    );
    assert!(ing.dataset.ntc.is_empty());
}

#[test]
fn missing_required_file_is_a_schema_error() {
    let (dir, _) = workspace();
    let bundle = dir.path().join("bundle");
    fs::remove_file(bundle.join("clusters.csv")).unwrap();
    match read_bundle(&bundle) {
        Err(BundleError::Schema(errs)) => {
            assert!(errs.iter().any(|e| e.contains("clusters")), "{errs:?}")
        }
        other => panic!(
            "expected a schema error, got {:?}",
            other.map(|i| i.warnings)
        ),
    }
}

#[test]
fn bundle_round_trips() {
    let (dir, _) = workspace();
    let a = read_bundle(&dir.path().join("bundle")).unwrap().dataset;
    let copy = dir.path().join("copy");
    write_bundle(&a, &copy).unwrap();
    let b = read_bundle(&copy).unwrap().dataset;
    assert_eq!(a, b);
}

#[test]
fn evaluation_range_outside_the_data_is_a_coverage_error() {
    let (_dir, mut cfg) = workspace();
    cfg.eval_start = cfg.eval_start - Days::new(120);
    let err = run(&cfg, Until::Evaluate).unwrap_err();
    assert!(matches!(err, RunError::Coverage(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

fn epf(args: &[&str]) -> std::process::Output {
    Command::new(PathBuf::from(env!("CARGO_BIN_EXE_epf")))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn cli_checks_bundles_and_maps_exit_codes() {
    let (dir, cfg) = workspace();
    let out = epf(&["ingest-check", "--bundle", cfg.bundle.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("zones: A, B"));

    let missing = dir.path().join("nowhere");
    let out = epf(&["ingest-check", "--bundle", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let config = dir.path().join("config.toml");
    let out = epf(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--eval-end",
        "2015-01-01",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = epf(&["dispatch", "--config", config.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("10 of 10 requested days ok"));
}
