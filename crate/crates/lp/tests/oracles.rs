use epf_lp::{solve, solve_with, LinearProgram, LpSolution, LpStatus, SolverOptions, VarId};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Feasible, bounded random LP: box-bounded variables, rows built around a
/// known interior point.
fn random_lp(rng: &mut ChaCha8Rng, n: usize, n_eq: usize, n_le: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let hi = rng.random_range(1.0..10.0);
        lp.add_var(rng.random_range(-5.0..5.0), 0.0, hi);
        x0.push(rng.random_range(0.1..0.9) * hi);
    }
    for i in 0..n_eq + n_le {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random::<f64>() < 0.6 {
                coeffs.push((VarId(j), rng.random_range(-3.0..3.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|(v, a)| a * x0[v.0]).sum();
        if i < n_eq {
            lp.add_eq(&coeffs, act, format!("eq{i}"));
        } else {
            lp.add_le(&coeffs, act + rng.random_range(0.0..2.0), format!("le{i}"));
        }
    }
    lp
}

fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut v: f64 = 0.0;
    for i in 0..lp.eq_rows().len() {
        let act: f64 = lp.eq_rows().row(i).map(|(j, a)| a * x[j]).sum();
        v = v.max((act - lp.eq_rows().rhs(i)).abs());
    }
    for i in 0..lp.ub_rows().len() {
        let act: f64 = lp.ub_rows().row(i).map(|(j, a)| a * x[j]).sum();
        v = v.max(act - lp.ub_rows().rhs(i));
    }
    for j in 0..lp.n_vars() {
        let (lo, hi) = lp.bounds(VarId(j));
        v = v.max(lo - x[j]).max(x[j] - hi);
    }
    v
}

fn check_certificate(lp: &LinearProgram, sol: &LpSolution) {
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(max_violation(lp, &sol.x) < 1e-7, "primal violation");
    for &y in &sol.duals_ub {
        assert!(y <= 1e-9, "positive dual on <= row: {y}");
    }
    let scale = 1.0 + sol.objective.abs();
    assert!(
        (sol.objective - sol.dual_objective(lp)).abs() < 1e-6 * scale,
        "duality gap"
    );
    // complementary slackness on rows and bounds
    for i in 0..lp.ub_rows().len() {
        let act: f64 = lp.ub_rows().row(i).map(|(j, a)| a * sol.x[j]).sum();
        assert!((sol.duals_ub[i] * (lp.ub_rows().rhs(i) - act)).abs() < 1e-6);
    }
    for j in 0..lp.n_vars() {
        let (lo, hi) = lp.bounds(VarId(j));
        let d = sol.reduced_costs[j];
        if d > 1e-7 {
            assert!(
                (sol.x[j] - lo).abs() < 1e-7,
                "positive reduced cost off lower bound"
            );
        } else if d < -1e-7 {
            assert!(
                (sol.x[j] - hi).abs() < 1e-7,
                "negative reduced cost off upper bound"
            );
        }
    }
}

/// Minimum over all vertices of the polytope, found by enumerating every set
/// of `n` tight constraints (rows or bounds).
fn vertex_enumeration(lp: &LinearProgram) -> f64 {
    let n = lp.n_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for block in [lp.eq_rows(), lp.ub_rows()] {
        for i in 0..block.len() {
            let mut a = vec![0.0; n];
            for (j, v) in block.row(i) {
                a[j] = v;
            }
            planes.push((a, block.rhs(i)));
        }
    }
    for j in 0..n {
        let (lo, hi) = lp.bounds(VarId(j));
        for b in [lo, hi] {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push((a, b));
        }
    }
    let mut best = f64::INFINITY;
    let k = planes.len();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let mut m: Vec<Vec<f64>> = pick
            .iter()
            .map(|&p| {
                let mut row = planes[p].0.clone();
                row.push(planes[p].1);
                row
            })
            .collect();
        if let Some(x) = gauss(&mut m, n) {
            if max_violation(lp, &x) < 1e-9 {
                best = best.min(lp.objective_at(&x));
            }
        }
        // next combination
        let mut i = n;
        while i > 0 && pick[i - 1] == k - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        pick[i - 1] += 1;
        for t in i..n {
            pick[t] = pick[t - 1] + 1;
        }
    }
    best
}

fn gauss(m: &mut [Vec<f64>], n: usize) -> Option<Vec<f64>> {
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for cc in c..=n {
                    m[r][cc] -= f * m[c][cc];
                }
            }
        }
    }
    Some((0..n).map(|r| m[r][n] / m[r][r]).collect())
}

#[test]
fn matches_vertex_enumeration_on_tiny_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let n_eq = rng.random_range(0..n);
        let n_le = rng.random_range(0..=3);
        let lp = random_lp(&mut rng, n, n_eq, n_le);
        let sol = solve(&lp).unwrap();
        let oracle = vertex_enumeration(&lp);
        assert!(
            (sol.objective - oracle).abs() < 1e-7 * (1.0 + oracle.abs()),
            "{} vs {}",
            sol.objective,
            oracle
        );
        check_certificate(&lp, &sol);
    }
}

#[test]
fn duals_are_finite_difference_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let delta = 1e-4;
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(3..=12);
        let n_eq = rng.random_range(1..=n / 2);
        let n_le = rng.random_range(0..=n / 2);
        let lp = random_lp(&mut rng, n, n_eq, n_le);
        let sol = solve(&lp).unwrap();
        if sol.degenerate {
            continue;
        }
        for i in 0..lp.eq_rows().len() {
            let row = lp.find_row(&format!("eq{i}")).unwrap();
            let mut bumped = lp.clone();
            bumped.set_rhs(row, lp.rhs(row) + delta);
            let sol2 = solve(&bumped).unwrap();
            let fd = sol2.objective - sol.objective;
            assert!(
                (fd - sol.dual(row) * delta).abs() < 1e-6,
                "row {i}: fd {fd} dual {}",
                sol.dual(row)
            );
        }
        checked += 1;
    }
}

#[test]
fn sparse_and_dense_factorisations_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sparse = SolverOptions {
        dense_threshold: 0,
        ..Default::default()
    };
    for _ in 0..30 {
        let lp = random_lp(&mut rng, 15, 5, 6);
        let a = solve(&lp).unwrap();
        let b = solve_with(&lp, &sparse).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-7 * (1.0 + a.objective.abs()));
        check_certificate(&lp, &b);
    }
}

/// Transportation problem: supplies, demands, per-link costs; balanced so
/// every demand row is tight.
fn transport(rng: &mut ChaCha8Rng, sources: usize, sinks: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut vars = vec![vec![]; sources];
    for row in vars.iter_mut() {
        for _ in 0..sinks {
            row.push(lp.add_nonneg_var(rng.random_range(1.0..20.0)));
        }
    }
    let demand: Vec<f64> = (0..sinks).map(|_| rng.random_range(5.0..50.0)).collect();
    let total: f64 = demand.iter().sum();
    for (s, row) in vars.iter().enumerate() {
        let coeffs: Vec<_> = row.iter().map(|&v| (v, 1.0)).collect();
        lp.add_le(&coeffs, 1.5 * total / sources as f64, format!("supply{s}"));
    }
    for (t, &d) in demand.iter().enumerate() {
        let coeffs: Vec<_> = vars.iter().map(|row| (row[t], 1.0)).collect();
        lp.add_eq(&coeffs, d, format!("demand{t}"));
    }
    lp
}

#[test]
fn larger_sparse_problems_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for &(s, t) in &[(10usize, 30usize), (40, 200)] {
        let lp = transport(&mut rng, s, t);
        let sol = solve(&lp).unwrap();
        check_certificate(&lp, &sol);
        // each demand dual is the cheapest delivered cost given supply duals
        for k in 0..t {
            let row = lp.find_row(&format!("demand{k}")).unwrap();
            assert!(sol.dual(row) > 0.0);
        }
    }
}

#[test]
fn identical_input_gives_identical_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let lp = transport(&mut rng, 20, 60);
    let a = solve(&lp).unwrap();
    let b = solve(&lp.clone()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn degenerate_cycling_prone_problem_terminates() {
    // Beale's example, which cycles under textbook Dantzig pricing
    let mut lp = LinearProgram::new();
    let x: Vec<VarId> = [-0.75, 150.0, -0.02, 6.0]
        .iter()
        .map(|&c| lp.add_nonneg_var(c))
        .collect();
    lp.add_le(
        &[(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)],
        0.0,
        "a",
    );
    lp.add_le(
        &[(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)],
        0.0,
        "b",
    );
    lp.add_le(&[(x[2], 1.0)], 1.0, "c");
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective + 0.05).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        ..ProptestConfig::default()
    })]

    #[test]
    fn optimal_solutions_carry_a_valid_certificate(seed in any::<u64>(), n in 2usize..10, n_eq in 0usize..4, n_le in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, n, n_eq.min(n - 1), n_le);
        let sol = solve(&lp).unwrap();
        check_certificate(&lp, &sol);
    }
}
