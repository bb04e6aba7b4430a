use epf_core::evaluation::{
    chi_square_uniform, coverage_histogram, dm_test, ks_uniform, mae, pinball, rmse, DmNorm,
};
use epf_core::postproc::QUANTILE_GRID;
use epf_core::simulate::{gaussian, rng};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;
use rand::Rng;

fn daily_errors(days: usize, sd: f64, seed: u64) -> Vec<[f64; 24]> {
    let mut r = rng(seed);
    (0..days)
        .map(|_| {
            let v = gaussian(&mut r, 24, sd);
            std::array::from_fn(|h| v[h])
        })
        .collect()
}

#[test]
fn dm_p_values_are_uniform_under_the_null() {
    for norm in [DmNorm::L1, DmNorm::L2] {
        let p: Vec<f64> = (0..200)
            .map(|seed| {
                let a = daily_errors(365, 5.0, 2 * seed);
                let b = daily_errors(365, 5.0, 2 * seed + 1);
                dm_test(&a, &b, norm).unwrap().p_value
            })
            .collect();
        let (d, ks_p) = ks_uniform(&p);
        assert!(ks_p > 0.01, "{norm:?}: D = {d}, p = {ks_p}");
    }
}

#[test]
fn dm_detects_doubled_errors() {
    let b = daily_errors(365, 3.0, 11);
    let a: Vec<[f64; 24]> = b.iter().map(|d| d.map(|v| 2.0 * v)).collect();
    for norm in [DmNorm::L1, DmNorm::L2] {
        let r = dm_test(&a, &b, norm).unwrap();
        assert!(r.p_value < 0.01, "{r:?}");
        assert!(dm_test(&b, &a, norm).unwrap().p_value > 0.99);
    }
}

/// Inverse of the piecewise-linear quantile function, with the outer
/// segments extended into the tails.
fn draw_from(q: &[f64; 19], u: f64) -> f64 {
    let g = &QUANTILE_GRID;
    let k = if u < g[0] {
        0
    } else if u >= g[18] {
        17
    } else {
        g.partition_point(|&x| x <= u) - 1
    };
    let k = k.min(17);
    q[k] + (u - g[k]) / (g[k + 1] - g[k]) * (q[k + 1] - q[k])
}

#[test]
fn draws_from_the_forecast_fill_bins_evenly() {
    let mut r = rng(5);
    let mut pairs = Vec::new();
    for i in 0..10_000 {
        let centre = 40.0 + 10.0 * (i as f64 * 0.1).sin();
        let scale = 2.0 + (i % 13) as f64;
        let q: [f64; 19] = std::array::from_fn(|k| {
            centre + scale * (QUANTILE_GRID[k] - 0.5) * (1.0 + (k as f64 - 9.0).abs() * 0.1)
        });
        let y = draw_from(&q, r.random::<f64>());
        pairs.push((y, q));
    }
    let counts = coverage_histogram(pairs.iter().map(|(y, q)| (*y, q)));
    assert_eq!(counts.iter().sum::<usize>(), 10_000);
    let (stat, p) = chi_square_uniform(&counts);
    assert!(p > 0.01, "chi2 {stat}, p {p}, {counts:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: Some(Box::new(FileFailurePersistence::Off)), ..ProptestConfig::default() })]

    #[test]
    fn rmse_dominates_mae(errs in prop::collection::vec(-100.0f64..100.0, 1..60)) {
        let zero = vec![0.0; errs.len()];
        prop_assert!(rmse(&errs, &zero).unwrap() >= mae(&errs, &zero).unwrap() - 1e-12);
    }

    #[test]
    fn median_pinball_is_half_the_mae(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..60)) {
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let f: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let q: Vec<[f64; 1]> = f.iter().map(|&v| [v]).collect();
        let loss = pinball(&y, &q, &[0.5]).unwrap()[0];
        prop_assert!((loss - 0.5 * mae(&y, &f).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn coverage_counts_partition_the_hours(ys in prop::collection::vec(-50.0f64..50.0, 0..200), shift in -20.0f64..20.0) {
        let q: [f64; 19] = std::array::from_fn(|k| shift + 3.0 * (k as f64 - 9.0));
        let counts = coverage_histogram(ys.iter().map(|&y| (y, &q)));
        prop_assert_eq!(counts.iter().sum::<usize>(), ys.len());
    }

    #[test]
    fn dm_is_antisymmetric(seed in 0u64..1000, scale in 0.5f64..2.0) {
        let a = daily_errors(40, 1.0, seed);
        let b = daily_errors(40, scale, seed + 5000);
        for norm in [DmNorm::L1, DmNorm::L2] {
            let ab = dm_test(&a, &b, norm).unwrap();
            let ba = dm_test(&b, &a, norm).unwrap();
            prop_assert_eq!(ab.statistic, -ba.statistic);
        }
    }
}
