use epf_core::dispatch::{
    build_lp, rolling_run, solve_instance, ClusterKind, DispatchError, DispatchInstance,
    TechnologyCluster, ThermalParams, ValueStep, ZoneData, HORIZON,
};
use epf_core::simulate::rng;
use epf_lp::{solve, SolverOptions};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;
use rand::Rng;

/// Marginal cost of serving `demand` by filling clusters in cost order.
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

#[test]
fn prices_follow_the_merit_order() {
    let mut r = rng(7);
    let start = std::time::Instant::now();
    let mut checked = 0;
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
        let res = solve_instance(&inst, &SolverOptions::default()).unwrap();
        for h in 0..24 {
            let want = sort_and_fill(units.clone(), demand[24 + h], 3000.0);
            assert!(
                (res.prices[0][h] - want).abs() < 1e-6,
                "hour {h}: {} vs {want}",
                res.prices[0][h]
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 50 * 24);
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

/// Two zones with every technology kind and three load scenarios.
fn rich_instance(seed: u64) -> DispatchInstance {
    let mut r = rng(seed);
    let mut wave = |base: f64, amp: f64| -> Vec<f64> {
        (0..HORIZON)
            .map(|t| {
                base + amp * ((t % 24) as f64 / 24.0 * std::f64::consts::TAU).sin()
                    + r.random_range(-5.0..5.0)
            })
            .map(|v: f64| v.max(0.0))
            .collect()
    };
    let a = wave(300.0, 80.0);
    let mut zone_a = ZoneData::new("a", a.clone());
    zone_a.demand = [0.9, 1.0, 1.1]
        .iter()
        .map(|f| {
            a.iter()
                .enumerate()
                .map(|(t, v)| if t >= 48 { v * f } else { *v })
                .collect()
        })
        .collect();
    zone_a.reserve_primary = 10.0;
    zone_a.reserve_sec_pos = 15.0;
    zone_a.reserve_sec_neg = 10.0;
    zone_a.chp_mustrun = vec![40.0; HORIZON];
    let zone_b = ZoneData::new("b", wave(200.0, 50.0));
    let thermal = |id: &str, zone, cap, vc, g_min, sc| {
        TechnologyCluster::new(
            id,
            zone,
            cap,
            ClusterKind::Thermal(ThermalParams {
                vc_minload: vc * 1.2,
                g_min,
                startup_cost: sc,
                ..ThermalParams::simple(vc)
            }),
        )
    };
    let profile = wave(0.4, 0.3).iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let clusters = vec![
        thermal("lignite", 0, 150.0, 15.0, 0.4, 30.0),
        thermal("gas", 0, 150.0, 55.0, 0.3, 60.0),
        thermal("oil", 0, 80.0, 120.0, 0.0, 0.0),
        TechnologyCluster::new("wind", 0, 200.0, ClusterKind::Renewable { profile }),
        TechnologyCluster::new(
            "psp",
            0,
            40.0,
            ClusterKind::StorageMid {
                efficiency: 0.75,
                cer: 1.0 / 9.0,
            },
        ),
        TechnologyCluster::new(
            "stl",
            0,
            30.0,
            ClusterKind::StorageLong {
                steps: vec![
                    ValueStep {
                        capacity: 15.0,
                        water_value: vec![35.0; HORIZON],
                    },
                    ValueStep {
                        capacity: 15.0,
                        water_value: vec![70.0; HORIZON],
                    },
                ],
            },
        ),
        TechnologyCluster::new("ror", 0, 20.0, ClusterKind::Baseload),
        thermal("nuclear", 1, 150.0, 8.0, 0.5, 0.0),
        thermal("ccgt", 1, 120.0, 45.0, 0.0, 0.0),
        TechnologyCluster::new(
            "hydro",
            1,
            30.0,
            ClusterKind::HydroReservoir {
                steps: vec![ValueStep {
                    capacity: 30.0,
                    water_value: vec![60.0; HORIZON],
                }],
            },
        ),
    ];
    let mut inst = DispatchInstance::new(0, vec![zone_a, zone_b], clusters);
    inst.probabilities = vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
    inst.ntc.set(0, 1, vec![50.0; HORIZON]);
    inst.ntc.set(1, 0, vec![60.0; HORIZON]);
    inst
}

#[test]
fn fixture_scale_window_solves_quickly() {
    let start = std::time::Instant::now();
    for seed in 0..5 {
        let res = solve_instance(&rich_instance(seed), &SolverOptions::default()).unwrap();
        assert!(res.prices.iter().flatten().all(|p| p.is_finite()));
    }
    let each = start.elapsed().as_secs_f64() / 5.0;
    assert!(each < 1.5, "{each} s per window");
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 12,
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        ..ProptestConfig::default()
    })]
    #[test]
    fn balance_holds_and_prices_stay_bounded(seed in 0u64..1000) {
        let inst = rich_instance(seed);
        let model = build_lp(&inst).unwrap();
        let sol = solve(&model.lp).unwrap();
        prop_assert!(sol.is_optimal());
        let max_demand = inst.zones.iter().flat_map(|z| z.demand.iter().flatten()).fold(0.0f64, |m, &v| m.max(v));
        let rows = model.lp.eq_rows();
        for i in 0..rows.len() {
            if rows.label(i).starts_with("balance/") {
                let activity: f64 = rows.row(i).map(|(j, a)| a * sol.x[j]).sum();
                prop_assert!((activity - rows.rhs(i)).abs() <= 1e-6 * max_demand);
            }
        }
        let res = solve_instance(&inst, &SolverOptions::default()).unwrap();
        for p in res.prices.iter().flatten() {
            prop_assert!(*p >= -20.0 - 1e-7 && *p <= 3000.0 + 1e-7, "price {}", p);
        }
    }
}

fn two_cluster_day(demand: f64) -> DispatchInstance {
    DispatchInstance::new(
        0,
        vec![ZoneData::new("z", vec![demand; HORIZON])],
        vec![
            TechnologyCluster::thermal("base", 0, 50.0, 20.0),
            TechnologyCluster::thermal("peak", 0, 100.0, 70.0),
        ],
    )
}

#[test]
fn rolling_prices_switch_regime_on_the_crossing_day() {
    let level = |day: i64| if day < 5 { 30.0 } else { 80.0 };
    let out = rolling_run(1, 8, &SolverOptions::default(), |day, _| {
        let mut inst = two_cluster_day(0.0);
        inst.first_day = day - 1;
        inst.zones[0].demand[0] = (0..HORIZON)
            .map(|t| level(day - 1 + (t / 24) as i64))
            .collect();
        Ok(inst)
    });
    for o in &out {
        let p = &o.result.as_ref().unwrap().prices[0];
        let want = if o.target_day < 5 { 20.0 } else { 70.0 };
        assert!(
            p.iter().all(|&v| (v - want).abs() < 1e-9),
            "day {}",
            o.target_day
        );
    }
}

#[test]
fn a_missing_day_leaves_a_gap_only_there() {
    let out = rolling_run(1, 5, &SolverOptions::default(), |day, _| {
        if day == 3 {
            return Err(DispatchError::Model("no data for day 3".into()));
        }
        Ok(two_cluster_day(40.0))
    });
    assert_eq!(out.len(), 5);
    for o in &out {
        assert_eq!(o.result.is_err(), o.target_day == 3);
        if let Ok(r) = &o.result {
            assert!(r.prices[0].iter().all(|&p| (p - 20.0).abs() < 1e-9));
        }
    }
}

#[test]
fn constant_system_gives_constant_prices() {
    let out = rolling_run(10, 12, &SolverOptions::default(), |_, _| {
        Ok(two_cluster_day(60.0))
    });
    assert!(out.iter().all(|o| o.result.as_ref().unwrap().prices[0]
        .iter()
        .all(|&p| (p - 70.0).abs() < 1e-9)));
}
