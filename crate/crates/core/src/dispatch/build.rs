use std::collections::HashMap;
use std::fmt;

use epf_lp::{LinearProgram, RowId, VarId};

use super::{ClusterKind, DispatchError, DispatchInstance, ScenarioIndexing, HORIZON};

/// Share of the storage energy capacity held at both ends of the window.
const STORAGE_BOUNDARY: f64 = 0.3;
/// Pumping capacity is 10 % below turbine capacity.
const PUMP_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Branch {
    Shared,
    Scenario(usize),
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Shared => write!(f, "all"),
            Branch::Scenario(s) => write!(f, "s{s}"),
        }
    }
}

/// One hour of one branch of the scenario tree.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub hour: usize,
    pub branch: Branch,
    pub pred: Option<usize>,
    /// Probability weight of the node's costs.
    pub weight: f64,
    /// Demand row used at this node.
    pub scenario: usize,
}

pub(crate) fn scenario_tree(inst: &DispatchInstance) -> Vec<Node> {
    let mut nodes = Vec::new();
    let shared_hours = match inst.indexing {
        ScenarioIndexing::Shared => 48,
        ScenarioIndexing::FullyIndexed => 0,
    };
    for hour in 0..shared_hours {
        nodes.push(Node {
            hour,
            branch: Branch::Shared,
            pred: hour.checked_sub(1),
            weight: 1.0,
            scenario: 0,
        });
    }
    for (s, &p) in inst.probabilities.iter().enumerate() {
        for hour in shared_hours..HORIZON {
            let pred = if hour == shared_hours {
                shared_hours.checked_sub(1)
            } else {
                Some(nodes.len() - 1)
            };
            nodes.push(Node {
                hour,
                branch: Branch::Scenario(s),
                pred,
                weight: p,
                scenario: s,
            });
        }
    }
    nodes
}

#[derive(Debug, Clone)]
pub(crate) enum UnitVars {
    Thermal {
        gen: Vec<VarId>,
        /// Absent when running capacity cannot matter for the cost.
        online: Option<Vec<VarId>>,
        startup: Vec<Option<VarId>>,
    },
    Renewable {
        gen: Vec<VarId>,
        curt: Vec<VarId>,
    },
    StorageMid {
        gen: Vec<VarId>,
        charge: Vec<VarId>,
        level: Vec<VarId>,
    },
    /// `[step][node]`; `pump` only for long-term storage.
    Steps {
        gen: Vec<Vec<VarId>>,
        pump: Option<Vec<Vec<VarId>>>,
    },
    Baseload,
}

/// The dispatch LP together with the index maps needed to read it back.
#[derive(Debug, Clone)]
pub struct DispatchModel {
    pub lp: LinearProgram,
    pub(crate) nodes: Vec<Node>,
    pub(crate) units: Vec<UnitVars>,
    /// `[zone][node]`
    pub(crate) balance: Vec<Vec<RowId>>,
    pub(crate) shed: Vec<Vec<VarId>>,
    pub(crate) spill: Vec<Vec<VarId>>,
    pub(crate) flows: Vec<((usize, usize), Vec<Option<VarId>>)>,
}

impl DispatchModel {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Reserve products are bought per (day, block, branch).
fn block_keys(nodes: &[Node], blocks: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let mut ids: HashMap<(usize, usize, Branch), usize> = HashMap::new();
    let mut weights = Vec::new();
    let of_node = nodes
        .iter()
        .map(|n| {
            let key = (n.hour / 24, blocks[n.hour % 24], n.branch);
            *ids.entry(key).or_insert_with(|| {
                weights.push(n.weight);
                weights.len() - 1
            })
        })
        .collect();
    (of_node, weights)
}

/// Reserve contributions of one zone, one list per block key.
#[derive(Default, Clone)]
struct ReservePool {
    primary: Vec<Vec<VarId>>,
    sec_pos: Vec<Vec<VarId>>,
    sec_neg: Vec<Vec<VarId>>,
}

pub fn build_lp(inst: &DispatchInstance) -> Result<DispatchModel, DispatchError> {
    inst.validate()?;
    let nodes = scenario_tree(inst);
    let nn = nodes.len();
    let nz = inst.zones.len();
    let mut lp = LinearProgram::new();
    let mut balance_terms: Vec<Vec<Vec<(VarId, f64)>>> = vec![vec![Vec::new(); nn]; nz];
    let mut baseload = vec![vec![0.0; HORIZON]; nz];
    let (pkey, pweight) = block_keys(&nodes, &inst.primary_blocks);
    let (skey, sweight) = block_keys(&nodes, &inst.secondary_blocks);
    let mut pools = vec![
        ReservePool {
            primary: vec![Vec::new(); pweight.len()],
            sec_pos: vec![Vec::new(); sweight.len()],
            sec_neg: vec![Vec::new(); sweight.len()],
        };
        nz
    ];
    // thermal output per zone and node, for the must-run rows
    let mut thermal_gen: Vec<Vec<Vec<VarId>>> = vec![vec![Vec::new(); nn]; nz];
    let mut thermal_room = vec![vec![0.0; HORIZON]; nz];
    let mut units = Vec::with_capacity(inst.clusters.len());

    for (ci, c) in inst.clusters.iter().enumerate() {
        let zone = &inst.zones[c.zone];
        let z = c.zone;
        let unit = match &c.kind {
            ClusterKind::Thermal(p) => {
                let adder = p.part_load_adder();
                let with_reserves = zone.has_reserves();
                let needs_online =
                    p.g_min > 0.0 || p.startup_cost > 0.0 || adder != 0.0 || with_reserves;
                let room: Vec<f64> = (0..HORIZON)
                    .map(|t| (c.available(t) - p.outage[t]).max(0.0))
                    .collect();
                for t in 0..HORIZON {
                    thermal_room[z][t] += room[t];
                }
                let gen: Vec<VarId> = nodes
                    .iter()
                    .map(|n| lp.add_var((p.vc_full - adder) * n.weight, 0.0, room[n.hour]))
                    .collect();
                let mut online = None;
                let mut startup = vec![None; nn];
                if needs_online {
                    let mut new_block_vars = |pool: &mut Vec<Vec<VarId>>| -> Vec<VarId> {
                        pool.iter_mut()
                            .map(|list| {
                                let v = lp.add_nonneg_var(0.0);
                                list.push(v);
                                v
                            })
                            .collect()
                    };
                    let reserve = with_reserves.then(|| {
                        let pool = &mut pools[z];
                        (
                            new_block_vars(&mut pool.primary),
                            new_block_vars(&mut pool.sec_pos),
                            new_block_vars(&mut pool.sec_neg),
                        )
                    });
                    let on: Vec<VarId> = nodes
                        .iter()
                        .map(|n| lp.add_var(adder * n.weight, 0.0, room[n.hour]))
                        .collect();
                    for (i, n) in nodes.iter().enumerate() {
                        let mut upper = vec![(gen[i], 1.0), (on[i], -1.0)];
                        let mut lower = vec![(on[i], p.g_min), (gen[i], -1.0)];
                        if let Some((pcr, pos, neg)) = &reserve {
                            upper.push((pcr[pkey[i]], 1.0));
                            upper.push((pos[skey[i]], 1.0));
                            lower.push((pcr[pkey[i]], 1.0));
                            lower.push((neg[skey[i]], 1.0));
                        }
                        lp.add_le(
                            &upper,
                            0.0,
                            format!("genmax/{}/{}/{}", c.id, n.hour, n.branch),
                        );
                        if p.g_min > 0.0 || with_reserves {
                            lp.add_le(
                                &lower,
                                0.0,
                                format!("genmin/{}/{}/{}", c.id, n.hour, n.branch),
                            );
                        }
                        if p.startup_cost > 0.0 {
                            let label = format!("startup/{}/{}/{}", c.id, n.hour, n.branch);
                            // without a previous window the first hour starts as it is
                            let previous = match (n.pred, &inst.initial_online) {
                                (Some(j), _) => Some((Some(on[j]), 0.0)),
                                (None, Some(init)) => Some((None, init[ci])),
                                (None, None) => None,
                            };
                            if let Some((pred, rhs)) = previous {
                                let su = lp.add_nonneg_var(p.startup_cost * n.weight);
                                let mut row = vec![(on[i], 1.0), (su, -1.0)];
                                row.extend(pred.map(|v| (v, -1.0)));
                                lp.add_le(&row, rhs, label);
                                startup[i] = Some(su);
                            }
                        }
                    }
                    online = Some(on);
                }
                for (i, &g) in gen.iter().enumerate() {
                    balance_terms[z][i].push((g, 1.0));
                    thermal_gen[z][i].push(g);
                }
                UnitVars::Thermal {
                    gen,
                    online,
                    startup,
                }
            }
            ClusterKind::Renewable { profile } => {
                let mut gen = Vec::with_capacity(nn);
                let mut curt = Vec::with_capacity(nn);
                for (i, n) in nodes.iter().enumerate() {
                    let feed = c.available(n.hour) * profile[n.hour];
                    let g = lp.add_var(0.0, 0.0, feed);
                    let k = lp.add_var(zone.curtc * n.weight, 0.0, feed);
                    lp.add_eq(
                        &[(g, 1.0), (k, 1.0)],
                        feed,
                        format!("res/{}/{}/{}", c.id, n.hour, n.branch),
                    );
                    balance_terms[z][i].push((g, 1.0));
                    gen.push(g);
                    curt.push(k);
                }
                UnitVars::Renewable { gen, curt }
            }
            ClusterKind::StorageMid { efficiency, cer } => {
                let energy = |t: usize| c.cap[t] / cer;
                let mut gen = Vec::with_capacity(nn);
                let mut charge = Vec::with_capacity(nn);
                let mut level = Vec::with_capacity(nn);
                for (i, n) in nodes.iter().enumerate() {
                    let room = c.available(n.hour);
                    let g = lp.add_var(0.0, 0.0, room);
                    let cm = lp.add_var(0.0, 0.0, room / PUMP_FACTOR);
                    let boundary = STORAGE_BOUNDARY * energy(n.hour);
                    let sl = if n.hour == HORIZON - 1 {
                        lp.add_var(0.0, boundary, boundary)
                    } else {
                        lp.add_var(0.0, 0.0, energy(n.hour))
                    };
                    lp.add_le(
                        &[(g, 1.0), (cm, PUMP_FACTOR)],
                        room,
                        format!("turbine/{}/{}/{}", c.id, n.hour, n.branch),
                    );
                    let mut row = vec![(sl, 1.0), (g, 1.0), (cm, -efficiency)];
                    let rhs = match n.pred {
                        Some(j) => {
                            row.push((level[j], -1.0));
                            0.0
                        }
                        None => boundary,
                    };
                    lp.add_eq(&row, rhs, format!("level/{}/{}/{}", c.id, n.hour, n.branch));
                    balance_terms[z][i].push((g, 1.0));
                    balance_terms[z][i].push((cm, -1.0));
                    gen.push(g);
                    charge.push(cm);
                    level.push(sl);
                }
                UnitVars::StorageMid { gen, charge, level }
            }
            ClusterKind::StorageLong { steps } | ClusterKind::HydroReservoir { steps } => {
                let pumps = matches!(c.kind, ClusterKind::StorageLong { .. });
                let mut gen = Vec::with_capacity(steps.len());
                let mut pump = Vec::with_capacity(steps.len());
                for (k, st) in steps.iter().enumerate() {
                    let mut g_k = Vec::with_capacity(nn);
                    let mut p_k = Vec::with_capacity(nn);
                    for (i, n) in nodes.iter().enumerate() {
                        let room = st.capacity * c.availability[n.hour];
                        let wv = st.water_value[n.hour] * n.weight;
                        let g = lp.add_var(wv, 0.0, room);
                        balance_terms[z][i].push((g, 1.0));
                        g_k.push(g);
                        if pumps {
                            // consumption is credited at the same water value
                            let cl = lp.add_var(-wv, 0.0, room);
                            lp.add_le(
                                &[(g, 1.0), (cl, 1.0)],
                                room,
                                format!("stl/{}/{k}/{}/{}", c.id, n.hour, n.branch),
                            );
                            balance_terms[z][i].push((cl, -1.0));
                            p_k.push(cl);
                        }
                    }
                    gen.push(g_k);
                    pump.push(p_k);
                }
                UnitVars::Steps {
                    gen,
                    pump: pumps.then_some(pump),
                }
            }
            ClusterKind::Baseload => {
                for t in 0..HORIZON {
                    baseload[z][t] += c.available(t);
                }
                UnitVars::Baseload
            }
        };
        units.push(unit);
    }

    let mut flows = Vec::new();
    for (&(a, b), cap) in inst.ntc.links() {
        let vars: Vec<Option<VarId>> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                (cap[n.hour] > 0.0).then(|| {
                    let f = lp.add_var(0.0, 0.0, cap[n.hour]);
                    balance_terms[a][i].push((f, -1.0));
                    balance_terms[b][i].push((f, 1.0));
                    f
                })
            })
            .collect();
        flows.push(((a, b), vars));
    }

    let mut shed = vec![Vec::with_capacity(nn); nz];
    let mut spill = vec![Vec::with_capacity(nn); nz];
    let mut balance = vec![Vec::with_capacity(nn); nz];
    for (z, zone) in inst.zones.iter().enumerate() {
        for (i, n) in nodes.iter().enumerate() {
            let s = lp.add_nonneg_var(zone.voll * n.weight);
            let o = lp.add_nonneg_var(zone.curtc * n.weight);
            let terms = &mut balance_terms[z][i];
            terms.push((s, 1.0));
            terms.push((o, -1.0));
            let rhs = zone.demand_at(n.scenario, n.hour) - baseload[z][n.hour];
            let label = format!(
                "balance/{}/{}/{}/{}",
                zone.name,
                n.hour / 24,
                n.hour % 24 + 1,
                n.branch
            );
            balance[z].push(lp.add_eq(terms, rhs, label));
            shed[z].push(s);
            spill[z].push(o);

            let chp = zone.chp_mustrun[n.hour].min(thermal_room[z][n.hour]);
            if chp > 0.0 {
                let row: Vec<(VarId, f64)> = thermal_gen[z][i].iter().map(|&g| (g, 1.0)).collect();
                lp.add_ge(
                    &row,
                    chp,
                    format!("chp/{}/{}/{}", zone.name, n.hour, n.branch),
                );
            }
        }
        let pool = &pools[z];
        let products = [
            ("pcr", zone.reserve_primary, &pool.primary, &pweight),
            ("scr_pos", zone.reserve_sec_pos, &pool.sec_pos, &sweight),
            ("scr_neg", zone.reserve_sec_neg, &pool.sec_neg, &sweight),
        ];
        for (name, need, lists, weights) in products {
            if need <= 0.0 {
                continue;
            }
            for (k, list) in lists.iter().enumerate() {
                let short = lp.add_nonneg_var(zone.voll * weights[k]);
                let mut row: Vec<(VarId, f64)> = list.iter().map(|&v| (v, 1.0)).collect();
                row.push((short, 1.0));
                lp.add_eq(&row, need, format!("{name}/{}/{k}", zone.name));
            }
        }
    }

    Ok(DispatchModel {
        lp,
        nodes,
        units,
        balance,
        shed,
        spill,
        flows,
    })
}
