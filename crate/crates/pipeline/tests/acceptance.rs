//! Acceptance suite: one PASS or FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use epf_core::density::{fit_quantile_regression, pinball_loss};
use epf_core::dispatch::{
    solve_instance, ClusterKind, DispatchInstance, TechnologyCluster, ThermalParams, ZoneData,
    HORIZON,
};
use epf_core::evaluation::{dm_test, ks_uniform, DmNorm};
use epf_core::load::{fit_sarma, fit_sarmax_2da, SarmaParams, SarmaxParams};
use epf_core::postproc::{
    fit_mv_days, fit_uv_days, MvArxParams, MvHourParams, PriceErrorPanel, UvArxParams,
};
use epf_core::simulate::{
    gaussian, mv_arx_path, rng, sarma_path, sarmax_path, uv_arx_path, ErrorDay,
};
use epf_core::timeseries::{Calendar, HourlySeries};
use epf_lp::{solve, LinearProgram, SolverOptions, VarId};
use epf_pipeline::fixture::{generate, FixtureKind};
use epf_pipeline::report::{Summary, SUMMARY};
use epf_pipeline::run::{run, Until};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1. merit order

fn sort_and_fill(mut units: Vec<(f64, f64)>, demand: f64, voll: f64) -> f64 {
    units.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut served = 0.0;
    for (cap, vc) in units {
        served += cap;
        if served > demand {
            return vc;
        }
    }
    voll
}

fn merit_order() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = r.random_range(1..=5);
        let units: Vec<(f64, f64)> = (0..k)
            .map(|_| (r.random_range(20.0..100.0), r.random_range(5.0..150.0)))
            .collect();
        let total: f64 = units.iter().map(|u| u.0).sum();
        let demand: Vec<f64> = (0..HORIZON)
            .map(|_| r.random_range(1.0..total * 1.1))
            .collect();
        let clusters = units
            .iter()
            .enumerate()
            .map(|(i, &(cap, vc))| TechnologyCluster::thermal(format!("u{i}"), 0, cap, vc))
            .collect();
        let inst = DispatchInstance::new(0, vec![ZoneData::new("z", demand.clone())], clusters);
        let res = solve_instance(&inst, &SolverOptions::default()).map_err(|e| e.to_string())?;
        for h in 0..24 {
            let want = sort_and_fill(units.clone(), demand[24 + h], 3000.0);
            worst = worst.max((res.prices[0][h] - want).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-6 && secs < 10.0,
        format!("50 instances, max |error| {worst:.2e}, {secs:.2} s"),
    )
}

// 2. startup cost on the spike hour

fn startup_loading() -> Outcome {
    let start = Instant::now();
    let startup = 500.0;
    let vc = 70.0;
    let mut demand = vec![40.0; HORIZON];
    demand[24 + 11] = 80.0;
    let peaker = TechnologyCluster::new(
        "peak",
        0,
        100.0,
        ClusterKind::Thermal(ThermalParams {
            g_min: 0.4,
            startup_cost: startup,
            ..ThermalParams::simple(vc)
        }),
    );
    let base = TechnologyCluster::thermal("base", 0, 50.0, 20.0);
    let inst = DispatchInstance::new(0, vec![ZoneData::new("z", demand)], vec![base, peaker]);
    let res = solve_instance(&inst, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let p = &res.prices[0];
    // the peaker runs only in the spike hour, so its whole start is paid there
    let output = res.generation[1][11];
    let started = res.startups[1][11];
    let premium = (p[11] - vc) * output;
    let err = (premium - startup * started).abs();
    let quiet = (0..24)
        .filter(|&h| h != 11)
        .all(|h| (p[h] - 20.0).abs() < 1e-9);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        err <= 1e-4 && started > 0.0 && quiet && secs < 5.0,
        format!(
            "spike price {:.4}, premium x output {premium:.6}, start cost {:.6}, {secs:.3} s",
            p[11],
            startup * started
        ),
    )
}

// 3. curtailment and shedding prices

fn negative_prices() -> Outcome {
    let flat = |v: f64| vec![v; HORIZON];
    let wind = TechnologyCluster::new(
        "wind",
        0,
        100.0,
        ClusterKind::Renewable { profile: flat(1.0) },
    );
    let surplus = DispatchInstance::new(0, vec![ZoneData::new("z", flat(50.0))], vec![wind]);
    let short = DispatchInstance::new(
        0,
        vec![ZoneData::new("z", flat(150.0))],
        vec![TechnologyCluster::thermal("coal", 0, 100.0, 50.0)],
    );
    let opts = SolverOptions::default();
    let a = solve_instance(&surplus, &opts).map_err(|e| e.to_string())?;
    let b = solve_instance(&short, &opts).map_err(|e| e.to_string())?;
    let ea = a.prices[0]
        .iter()
        .map(|p| (p + 20.0).abs())
        .fold(0.0, f64::max);
    let eb = b.prices[0]
        .iter()
        .map(|p| (p - 3000.0).abs())
        .fold(0.0, f64::max);
    verdict(
        ea <= 1e-9 && eb <= 1e-9,
        format!(
            "surplus price {}, shortage price {} (max deviation {ea:.1e} / {eb:.1e})",
            a.prices[0][0], b.prices[0][0]
        ),
    )
}

// 4. duals against finite differences

fn random_lp(r: &mut ChaCha8Rng, n: usize, n_eq: usize, n_le: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let hi = r.random_range(1.0..10.0);
        lp.add_var(r.random_range(-5.0..5.0), 0.0, hi);
        x0.push(r.random_range(0.1..0.9) * hi);
    }
    for i in 0..n_eq + n_le {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if r.random::<f64>() < 0.6 {
                coeffs.push((VarId(j), r.random_range(-3.0..3.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|(v, a)| a * x0[v.0]).sum();
        if i < n_eq {
            lp.add_eq(&coeffs, act, format!("eq{i}"));
        } else {
            lp.add_le(&coeffs, act + r.random_range(0.0..2.0), format!("le{i}"));
        }
    }
    lp
}

fn lp_duals() -> Outcome {
    let mut r = rng(404);
    let delta = 1e-4;
    let (mut checked, mut skipped) = (0, 0);
    let mut worst: f64 = 0.0;
    while checked < 100 {
        let n = r.random_range(3..=12);
        let n_eq = r.random_range(1..=n / 2);
        let n_le = r.random_range(0..=n / 2);
        let lp = random_lp(&mut r, n, n_eq, n_le);
        let sol = solve(&lp).map_err(|e| e.to_string())?;
        if sol.degenerate {
            skipped += 1;
            continue;
        }
        for i in 0..n_eq {
            let row = lp.find_row(&format!("eq{i}")).ok_or("row lost")?;
            let mut bumped = lp.clone();
            bumped.set_rhs(row, lp.rhs(row) + delta);
            let fd = solve(&bumped).map_err(|e| e.to_string())?.objective - sol.objective;
            worst = worst.max((fd - sol.dual(row) * delta).abs());
        }
        checked += 1;
    }
    verdict(
        worst < 1e-6,
        format!("100 LPs ({skipped} degenerate skipped), max |fd - dual * delta| {worst:.2e}"),
    )
}

// 5. parameter recovery

fn series(v: Vec<f64>) -> HourlySeries {
    HourlySeries::from_days(0, v, &Calendar::new(1, [])).expect("whole days")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn exogenous_days(n: usize, seed: u64) -> Vec<ErrorDay> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let level = gaussian(&mut r, 1, 1.0)[0];
            let spread = r.random_range(0.2..2.0);
            let w = gaussian(&mut r, 24, spread);
            ErrorDay {
                holiday: r.random_bool(0.15),
                wind: std::array::from_fn(|h| level + w[h]),
            }
        })
        .collect()
}

fn error_panel(eps: Vec<[f64; 24]>, days: &[ErrorDay]) -> PriceErrorPanel {
    PriceErrorPanel::new(
        0,
        eps,
        days.iter().map(|d| d.holiday).collect(),
        days.iter().map(|d| d.wind).collect(),
    )
    .expect("consistent panel")
}

fn recovery() -> Outcome {
    let start = Instant::now();
    const DAYS: usize = 365;
    let sarma = SarmaParams {
        phi0: 0.0,
        phi1: 0.6,
        phi24: 0.3,
        omega1: 0.2,
        omega24: 0.1,
        sigma2: 1.0,
    };
    let sv = |p: &SarmaParams| vec![p.phi0, p.phi1, p.phi24, p.omega1, p.omega24];
    let sarmax = SarmaxParams {
        sarma: SarmaParams {
            phi0: 0.5,
            phi1: 0.5,
            phi24: 0.3,
            omega1: 0.2,
            omega24: 0.1,
            sigma2: 1.0,
        },
        phi168: 0.2,
    };
    let xv = |p: &SarmaxParams| {
        let mut v = sv(&p.sarma);
        v.push(p.phi168);
        v
    };
    let uv = UvArxParams {
        phi: [0.5, 0.3, 0.1, 0.1, 0.1, 0.2],
        omega: [0.1, 0.1, 2.0, 1.5],
        sigma2: 1.0,
    };
    let uvv = |p: &UvArxParams| p.phi.iter().chain(&p.omega).copied().collect::<Vec<_>>();
    let mv = MvArxParams {
        hours: (0..24)
            .map(|h| MvHourParams {
                phi: [0.2 + 0.02 * h as f64, 0.4, 0.2],
                omega: [0.1, 0.1, 1.0, 2.0],
                sigma2: 0.04,
                dropped: vec![],
            })
            .collect(),
    };
    let mvv = |p: &MvArxParams| {
        p.hours
            .iter()
            .flat_map(|h| h.phi.iter().chain(&h.omega).copied())
            .collect::<Vec<_>>()
    };

    let mut hits = [0usize; 4];
    for seed in 0..20u64 {
        let fit = fit_sarma(&series(sarma_path(&sarma, DAYS * 24, 500, seed)))
            .map_err(|e| e.to_string())?;
        hits[0] += usize::from(max_diff(&sv(&fit.params), &sv(&sarma)) <= 0.1);
        let fit = fit_sarmax_2da(&series(sarmax_path(&sarmax, DAYS * 24, 2000, seed)))
            .map_err(|e| e.to_string())?;
        hits[1] += usize::from(max_diff(&xv(&fit.params), &xv(&sarmax)) <= 0.1);

        let ex = exogenous_days(DAYS + 8, seed + 7000);
        let eps = uv_arx_path(&uv, &ex[..DAYS + 7], seed);
        let fit = fit_uv_days(&error_panel(eps, &ex), DAYS as i64 + 7, DAYS, None)
            .map_err(|e| e.to_string())?;
        hits[2] += usize::from(max_diff(&uvv(&fit.params), &uvv(&uv)) <= 0.1);

        let ex = exogenous_days(DAYS + 8, seed + 9000);
        let eps = mv_arx_path(&mv, &ex[..DAYS + 7], seed);
        let fit = fit_mv_days(&error_panel(eps, &ex), DAYS as i64 + 7, DAYS)
            .map_err(|e| e.to_string())?;
        hits[3] += usize::from(max_diff(&mvv(&fit), &mvv(&mv)) <= 0.1);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        hits.iter().all(|&h| h >= 18) && secs < 60.0,
        format!(
            "seeds within 0.1 of 20: SARMA {}, SARMAX {}, uv ARX {}, mv ARX (all 24 hours) {}; {secs:.1} s",
            hits[0], hits[1], hits[2], hits[3]
        ),
    )
}

// 6 and 7. synthetic end-to-end fixture

fn pipeline_fixture() -> Result<(Summary, f64), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let cfg = generate(FixtureKind::Acceptance, dir.path(), 7).map_err(|e| e.to_string())?;
    let out = run(&cfg, Until::Evaluate).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    if out.failed_days > 0 {
        return Err(format!(
            "{} of {} days failed",
            out.failed_days, out.requested_days
        ));
    }
    let text = fs::read_to_string(cfg.run_dir.join(SUMMARY)).map_err(|e| e.to_string())?;
    let summary = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok((summary, secs))
}

fn improvement(fx: &Result<(Summary, f64), String>) -> Outcome {
    let (s, secs) = fx.as_ref().map_err(Clone::clone)?;
    verdict(
        s.rmse_improvement >= 0.15 && *secs < 300.0,
        format!(
            "RMSE {:.3} -> {:.3} ({:.1} % lower) over {} hours, fixture and run {secs:.0} s",
            s.rmse_dispatch,
            s.rmse_forecast,
            100.0 * s.rmse_improvement,
            s.hours
        ),
    )
}

fn calibration(fx: &Result<(Summary, f64), String>) -> Outcome {
    let (s, _) = fx.as_ref().map_err(Clone::clone)?;
    let p = s.coverage_p_value.ok_or("no coverage histogram")?;
    verdict(
        p > 0.01 && s.hours >= 5000,
        format!(
            "chi-square {:.2}, p = {p:.4} over {} hours",
            s.coverage_chi_square.unwrap_or(f64::NAN),
            s.hours
        ),
    )
}

// 8. quantile regression against exhaustive search

fn qr_loss(x: &[Vec<f64>], y: &[f64], b: &[f64], q: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(r, &yi)| pinball_loss(q, yi - r.iter().zip(b).map(|(a, c)| a * c).sum::<f64>()))
        .sum()
}

/// Minimum over all lines through two data points, which contains a global
/// minimiser, with the number of distinct minimising lines.
fn exhaustive(x: &[Vec<f64>], y: &[f64], q: f64) -> (f64, Vec<[f64; 2]>) {
    let mut best = f64::INFINITY;
    let mut argmin: Vec<[f64; 2]> = Vec::new();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[j][1] - x[i][1];
            if dx.abs() < 1e-9 {
                continue;
            }
            let slope = (y[j] - y[i]) / dx;
            let b = [y[i] - slope * x[i][1], slope];
            let l = qr_loss(x, y, &b, q);
            if l < best - 1e-9 {
                best = l;
                argmin = vec![b];
            } else if l <= best + 1e-9 && !argmin.iter().any(|a| max_diff(a, &b) < 1e-9) {
                argmin.push(b);
            }
        }
    }
    (best, argmin)
}

fn quantile_oracle() -> Outcome {
    let mut r = rng(808);
    let (mut worst_loss, mut worst_beta): (f64, f64) = (0.0, 0.0);
    let mut unique = 0;
    let mut cases = 0;
    for _ in 0..200 {
        let n = r.random_range(3..=6);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![1.0, r.random_range(-5.0..5.0)])
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|row| 1.0 + 0.5 * row[1] + gaussian(&mut r, 1, 2.0)[0])
            .collect();
        for q in [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95] {
            let fit = fit_quantile_regression(&x, &y, q).map_err(|e| e.to_string())?;
            let got = qr_loss(&x, &y, &fit.model.beta, q);
            let (want, argmin) = exhaustive(&x, &y, q);
            worst_loss = worst_loss.max((got - want).abs());
            if argmin.len() == 1 {
                unique += 1;
                worst_beta = worst_beta.max(max_diff(&fit.model.beta, &argmin[0]));
            }
            cases += 1;
        }
    }
    verdict(
        worst_loss <= 1e-6 && worst_beta <= 1e-6,
        format!("{cases} fits on 3 to 6 points: max loss gap {worst_loss:.1e}, max coefficient gap {worst_beta:.1e} on {unique} unique minimisers"),
    )
}

// 9. Diebold-Mariano under the null

fn daily_errors(days: usize, sd: f64, seed: u64) -> Vec<[f64; 24]> {
    let mut r = rng(seed);
    (0..days)
        .map(|_| {
            let v = gaussian(&mut r, 24, sd);
            std::array::from_fn(|h| v[h])
        })
        .collect()
}

fn dm_null() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for norm in [DmNorm::L1, DmNorm::L2] {
        let mut p = Vec::new();
        let mut antisymmetric = true;
        for seed in 0..200u64 {
            let a = daily_errors(365, 5.0, 2 * seed + 10_000);
            let b = daily_errors(365, 5.0, 2 * seed + 10_001);
            let ab = dm_test(&a, &b, norm).map_err(|e| e.to_string())?;
            let ba = dm_test(&b, &a, norm).map_err(|e| e.to_string())?;
            antisymmetric &= ab.statistic == -ba.statistic;
            p.push(ab.p_value);
        }
        let (_, ks_p) = ks_uniform(&p);
        ok &= ks_p > 0.01 && antisymmetric;
        detail.push(format!(
            "{norm:?}: KS p = {ks_p:.3}, antisymmetric {antisymmetric}"
        ));
    }
    verdict(ok, detail.join("; "))
}

// 10. determinism

fn csv_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .display()
                    .to_string();
                out.insert(rel, fs::read(&path).unwrap_or_default());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = generate(FixtureKind::Toy, dir.path(), 7).map_err(|e| e.to_string())?;
        run(&cfg, Until::Evaluate).map_err(|e| e.to_string())?;
        runs.push(csv_files(dir.path()));
    }
    let differing: Vec<&String> = runs[0]
        .keys()
        .filter(|k| runs[1].get(*k) != runs[0].get(*k))
        .collect();
    let same_set = runs[0].len() == runs[1].len();
    verdict(
        differing.is_empty() && same_set && runs[0].len() > 20,
        format!(
            "{} CSV files compared, {} differ",
            runs[0].len(),
            differing.len()
        ),
    )
}

fn main() {
    let fixture = pipeline_fixture();
    let checks: Vec<(&str, Outcome)> = vec![
        ("merit-order prices", merit_order()),
        ("start-up cost on the spike hour", startup_loading()),
        ("curtailment and shedding prices", negative_prices()),
        ("duals as derivatives", lp_duals()),
        ("parameter recovery", recovery()),
        ("post-processing improves RMSE", improvement(&fixture)),
        ("probabilistic calibration", calibration(&fixture)),
        ("quantile regression oracle", quantile_oracle()),
        ("Diebold-Mariano null", dm_null()),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in checks.iter().enumerate() {
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria pass",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
