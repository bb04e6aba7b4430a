use epf_lp::SolverOptions;

use super::extract::{solve_instance, DispatchResult};
use super::{DispatchError, DispatchInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct DayOutcome {
    pub target_day: i64,
    pub result: Result<DispatchResult, DispatchError>,
}

/// Solves one window per target day in order. `instance_for(day, online)`
/// assembles the window `day - 1 ..= day + 1`; `online` carries the running
/// capacity left by the previous day's solve. A failed day yields an error
/// entry and the next window starts without carried state.
pub fn rolling_run<F>(
    first_target: i64,
    last_target: i64,
    opts: &SolverOptions,
    mut instance_for: F,
) -> Vec<DayOutcome>
where
    F: FnMut(i64, Option<&[f64]>) -> Result<DispatchInstance, DispatchError>,
{
    let mut carried: Option<Vec<f64>> = None;
    let mut out = Vec::new();
    for day in first_target..=last_target {
        let result =
            instance_for(day, carried.as_deref()).and_then(|inst| solve_instance(&inst, opts));
        carried = result.as_ref().ok().map(|r| r.terminal_online.clone());
        out.push(DayOutcome {
            target_day: day,
            result,
        });
    }
    out
}
