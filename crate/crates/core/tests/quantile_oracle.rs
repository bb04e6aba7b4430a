use epf_core::density::{fit_quantile_regression, pinball_loss};
use epf_core::simulate::{gaussian, rng};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;
use rand::Rng;

fn loss(x: &[Vec<f64>], y: &[f64], b: &[f64], q: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(r, &yi)| pinball_loss(q, yi - r.iter().zip(b).map(|(a, c)| a * c).sum::<f64>()))
        .sum()
}

/// Some optimal two-coefficient line passes through two data points, so the
/// minimum over all interpolating lines is the global minimum.
fn enumerate_pairs(x: &[Vec<f64>], y: &[f64], q: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[j][1] - x[i][1];
            if dx.abs() < 1e-12 {
                continue;
            }
            let slope = (y[j] - y[i]) / dx;
            let b = [y[i] - slope * x[i][1], slope];
            best = best.min(loss(x, y, &b, q));
        }
    }
    best
}

fn sample(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let noise = gaussian(&mut r, n, 1.0);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![1.0, r.random_range(-5.0..5.0)])
        .collect();
    let y = x
        .iter()
        .zip(&noise)
        .map(|(row, e)| 2.0 + 0.7 * row[1] + e * (1.0 + 0.2 * row[1].abs()))
        .collect();
    (x, y)
}

#[test]
fn matches_exhaustive_interpolation_search() {
    for seed in 0..30 {
        let (x, y) = sample(seed, 35);
        for q in [0.05, 0.25, 0.5, 0.9, 0.95] {
            let fit = fit_quantile_regression(&x, &y, q).unwrap();
            let got = loss(&x, &y, &fit.model.beta, q);
            let want = enumerate_pairs(&x, &y, q);
            assert!(
                (got - want).abs() <= 1e-7 * (1.0 + want),
                "seed {seed} q {q}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn large_sample_coverage_and_speed() {
    let (x, y) = sample(99, 8760);
    let t = std::time::Instant::now();
    for q in [0.05, 0.95] {
        let fit = fit_quantile_regression(&x, &y, q).unwrap();
        let below = x
            .iter()
            .zip(&y)
            .filter(|(r, &yi)| yi <= fit.model.beta[0] + fit.model.beta[1] * r[1] + 1e-9)
            .count() as f64
            / y.len() as f64;
        assert!((below - q).abs() < 0.005, "q {q}: in-sample share {below}");
    }
    assert!(
        t.elapsed().as_secs_f64() < 5.0,
        "two fits took {:?}",
        t.elapsed()
    );
}

#[test]
fn intercept_only_is_the_empirical_quantile() {
    let mut r = rng(5);
    let y = gaussian(&mut r, 101, 3.0);
    let x = vec![vec![1.0]; y.len()];
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let fit = fit_quantile_regression(&x, &y, 0.5).unwrap();
    assert!((fit.model.beta[0] - sorted[50]).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        ..ProptestConfig::default()
    })]
    #[test]
    fn no_small_perturbation_improves(seed in 0u64..10_000, q in 0.02f64..0.98, d0 in -1.0f64..1.0, d1 in -1.0f64..1.0) {
        let (x, y) = sample(seed, 60);
        let fit = fit_quantile_regression(&x, &y, q).unwrap();
        let b = &fit.model.beta;
        let base = loss(&x, &y, b, q);
        for scale in [1e-3, 1e-1] {
            let moved = [b[0] + scale * d0, b[1] + scale * d1];
            prop_assert!(loss(&x, &y, &moved, q) >= base - 1e-8 * (1.0 + base));
        }
    }
}
