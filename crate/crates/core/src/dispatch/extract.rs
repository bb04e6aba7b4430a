use epf_lp::{solve_with, LpSolution, SolverOptions};

use super::build::{build_lp, DispatchModel, UnitVars};
use super::{DispatchError, DispatchInstance, HORIZON};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub objective: f64,
    pub iterations: usize,
    /// A basic variable sits at a bound, so some prices may not be unique.
    pub degenerate: bool,
    pub dual_degenerate: bool,
    pub rows: usize,
    pub columns: usize,
}

/// Target-day outcome of one window. Quantities on scenario-indexed hours
/// are probability-weighted means.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub target_day: i64,
    /// EUR/MWh as `[zone][hour]`.
    pub prices: Vec<Vec<f64>>,
    /// Net output in MW as `[cluster][hour]`; storage pumping is negative.
    pub generation: Vec<Vec<f64>>,
    pub startups: Vec<Vec<f64>>,
    /// MWh as `[cluster][hour]`, zero for clusters without a reservoir level.
    pub storage_level: Vec<Vec<f64>>,
    pub flows: Vec<((usize, usize), Vec<f64>)>,
    pub shed: Vec<Vec<f64>>,
    /// Renewable curtailment plus spilled must-run output, `[zone][hour]`.
    pub curtailment: Vec<Vec<f64>>,
    /// Online MW per cluster in the last hour of the first day, which is the
    /// hour before the next window.
    pub terminal_online: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

/// Weighted sum of `f(node)` over the nodes of horizon hour `t`.
fn at_hour(
    model: &DispatchModel,
    by_hour: &[Vec<usize>],
    t: usize,
    f: impl Fn(usize) -> f64,
) -> f64 {
    by_hour[t]
        .iter()
        .map(|&i| model.nodes[i].weight * f(i))
        .sum()
}

pub fn extract_prices(
    inst: &DispatchInstance,
    model: &DispatchModel,
    sol: &LpSolution,
) -> Result<DispatchResult, DispatchError> {
    if !sol.is_optimal() {
        return Err(DispatchError::SolveFailed(sol.status));
    }
    let mut by_hour = vec![Vec::new(); HORIZON];
    for (i, n) in model.nodes.iter().enumerate() {
        by_hour[n.hour].push(i);
    }
    let target: Vec<usize> = (24..48).collect();
    let x = |v: epf_lp::VarId| sol.value(v);
    let series = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        target
            .iter()
            .map(|&t| at_hour(model, &by_hour, t, f))
            .collect()
    };

    // duals already carry the node weights, so summing them gives the
    // expected marginal cost
    let prices = model
        .balance
        .iter()
        .map(|rows| {
            target
                .iter()
                .map(|&t| by_hour[t].iter().map(|&i| sol.dual(rows[i])).sum())
                .collect()
        })
        .collect();

    let mut generation = Vec::with_capacity(inst.clusters.len());
    let mut startups = Vec::with_capacity(inst.clusters.len());
    let mut storage_level = Vec::with_capacity(inst.clusters.len());
    let mut terminal_online = Vec::with_capacity(inst.clusters.len());
    let mut curtailment: Vec<Vec<f64>> = model.spill.iter().map(|s| series(&|i| x(s[i]))).collect();
    let zero = vec![0.0; 24];
    for (c, unit) in inst.clusters.iter().zip(&model.units) {
        let last_first_day = |f: &dyn Fn(usize) -> f64| at_hour(model, &by_hour, 23, f);
        match unit {
            UnitVars::Thermal {
                gen,
                online,
                startup,
            } => {
                generation.push(series(&|i| x(gen[i])));
                startups.push(series(&|i| startup[i].map_or(0.0, x)));
                storage_level.push(zero.clone());
                let on = online.as_ref().unwrap_or(gen);
                terminal_online.push(last_first_day(&|i| x(on[i])));
            }
            UnitVars::Renewable { gen, curt } => {
                generation.push(series(&|i| x(gen[i])));
                let spilled = series(&|i| x(curt[i]));
                for (acc, v) in curtailment[c.zone].iter_mut().zip(spilled) {
                    *acc += v;
                }
                startups.push(zero.clone());
                storage_level.push(zero.clone());
                terminal_online.push(0.0);
            }
            UnitVars::StorageMid { gen, charge, level } => {
                generation.push(series(&|i| x(gen[i]) - x(charge[i])));
                startups.push(zero.clone());
                storage_level.push(series(&|i| x(level[i])));
                terminal_online.push(0.0);
            }
            UnitVars::Steps { gen, pump } => {
                generation.push(series(&|i| {
                    let out: f64 = gen.iter().map(|g| x(g[i])).sum();
                    let used: f64 = pump.iter().flatten().map(|p| x(p[i])).sum();
                    out - used
                }));
                startups.push(zero.clone());
                storage_level.push(zero.clone());
                terminal_online.push(0.0);
            }
            UnitVars::Baseload => {
                generation.push(target.iter().map(|&t| c.available(t)).collect());
                startups.push(zero.clone());
                storage_level.push(zero.clone());
                terminal_online.push(0.0);
            }
        }
    }
    let flows = model
        .flows
        .iter()
        .map(|(link, vars)| (*link, series(&|i| vars[i].map_or(0.0, x))))
        .collect();
    let shed = model.shed.iter().map(|s| series(&|i| x(s[i]))).collect();

    Ok(DispatchResult {
        target_day: inst.target_day(),
        prices,
        generation,
        startups,
        storage_level,
        flows,
        shed,
        curtailment,
        terminal_online,
        diagnostics: SolveDiagnostics {
            objective: sol.objective,
            iterations: sol.iterations,
            degenerate: sol.degenerate,
            dual_degenerate: sol.dual_degenerate,
            rows: model.lp.n_rows(),
            columns: model.lp.n_vars(),
        },
    })
}

/// Builds, solves and reads back one window.
pub fn solve_instance(
    inst: &DispatchInstance,
    opts: &SolverOptions,
) -> Result<DispatchResult, DispatchError> {
    let model = build_lp(inst)?;
    let sol = solve_with(&model.lp, opts)?;
    extract_prices(inst, &model, &sol)
}
