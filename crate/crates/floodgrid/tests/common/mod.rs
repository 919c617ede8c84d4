//! Shared oracles for the integration suites.
//!
//! The recourse oracle never touches the big-M linkage: it fixes the forced
//! bus pattern directly (a substation survives iff hardened to at least the
//! flood depth), builds the resulting pure LP with hard Ohm equalities on
//! live branches, and enumerates commitment patterns when generators carry
//! minimum outputs. Plan-space optima then come from exhaustive enumeration
//! over all integer hardening plans.

use std::collections::BTreeMap;

use floodgrid::formulations::{tightened_heights, HardeningPlan};
use floodgrid::grid::{parse_grid, Grid, SubstationId};
use floodgrid::milp::{solve, MilpModel, Relation, SolveParams, SolveStatus, VarKind};
use floodgrid::scenario::{parse_scenarios, FloodScenario, ScenarioSet};

pub fn desk_grid() -> Grid {
    parse_grid(include_str!("../../../../data/desk_grid.json").as_bytes()).unwrap()
}

pub fn desk_scenarios(grid: &Grid) -> ScenarioSet {
    parse_scenarios(
        include_str!("../../../../data/desk_scenarios.json").as_bytes(),
        grid,
    )
    .unwrap()
}

/// Desk-grid zero-shed budget, established by hand and cross-checked in the
/// acceptance suite.
pub const DESK_ZERO_SHED_BUDGET: f64 = 160_000.0;

/// Exact per-unit shed for a fixed plan and scenario, via the z-pattern LP.
pub fn oracle_recourse_shed(grid: &Grid, plan: &HardeningPlan, scenario: &FloodScenario) -> f64 {
    let alive: BTreeMap<&str, bool> = grid
        .buses
        .iter()
        .map(|b| {
            let depth = scenario.depth(&b.substation_id);
            (b.id.as_str(), plan.survives(&b.substation_id, depth))
        })
        .collect();

    // Generators with a minimum output need a commitment choice; enumerate.
    let committed_candidates: Vec<&str> = grid
        .buses
        .iter()
        .filter(|b| alive[b.id.as_str()] && b.gen_min > 0.0 && b.gen_max > 0.0)
        .map(|b| b.id.as_str())
        .collect();
    assert!(
        committed_candidates.len() <= 8,
        "oracle commitment enumeration limited to 8 generators"
    );

    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << committed_candidates.len()) {
        let on: Vec<&str> = committed_candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, b)| *b)
            .collect();
        if let Some(shed) = fixed_pattern_lp(grid, &alive, &on) {
            best = best.min(shed);
        }
    }
    assert!(best.is_finite(), "shutdown pattern is always feasible");
    best
}

/// Pure LP once bus states and generator commitments are fixed. Live
/// branches carry a hard Ohm equality; dead branches carry no flow.
fn fixed_pattern_lp(grid: &Grid, alive: &BTreeMap<&str, bool>, committed: &[&str]) -> Option<f64> {
    let mut m = MilpModel::new("oracle");
    let mut served = Vec::new();
    let mut g_vars = BTreeMap::new();
    let mut a_vars = BTreeMap::new();
    for bus in &grid.buses {
        let is_alive = alive[bus.id.as_str()];
        let s_hi = if is_alive { bus.load } else { 0.0 };
        let s = m.add_var(format!("s_{}", bus.id), VarKind::Continuous, 0.0, s_hi);
        served.push((bus.id.as_str(), s));
        let (g_lo, g_hi) = if !is_alive || bus.gen_max <= 0.0 {
            (0.0, 0.0)
        } else if bus.gen_min > 0.0 {
            if committed.contains(&bus.id.as_str()) {
                (bus.gen_min, bus.gen_max)
            } else {
                (0.0, 0.0)
            }
        } else {
            (0.0, bus.gen_max)
        };
        let g = m.add_var(format!("g_{}", bus.id), VarKind::Continuous, g_lo, g_hi);
        g_vars.insert(bus.id.as_str(), g);
        let (a_lo, a_hi) = if bus.is_reference {
            (0.0, 0.0)
        } else {
            (-std::f64::consts::PI, std::f64::consts::PI)
        };
        let a = m.add_var(format!("a_{}", bus.id), VarKind::Continuous, a_lo, a_hi);
        a_vars.insert(bus.id.as_str(), a);
    }
    let mut flows = BTreeMap::new();
    for branch in &grid.branches {
        let live = alive[branch.from_bus.as_str()] && alive[branch.to_bus.as_str()];
        let cap = if live { branch.capacity } else { 0.0 };
        let e = m.add_var(format!("e_{}", branch.id), VarKind::Continuous, -cap, cap);
        flows.insert(branch.id.as_str(), e);
        if live {
            m.add_constraint(
                format!("ohm_{}", branch.id),
                vec![
                    (a_vars[branch.from_bus.as_str()], branch.susceptance),
                    (a_vars[branch.to_bus.as_str()], -branch.susceptance),
                    (e, -1.0),
                ],
                Relation::Eq,
                0.0,
            );
        }
    }
    for bus in &grid.buses {
        let mut terms = Vec::new();
        for branch in &grid.branches {
            if branch.from_bus == bus.id {
                terms.push((flows[branch.id.as_str()], 1.0));
            }
            if branch.to_bus == bus.id {
                terms.push((flows[branch.id.as_str()], -1.0));
            }
        }
        terms.push((g_vars[bus.id.as_str()], -1.0));
        let s = served.iter().find(|(id, _)| *id == bus.id.as_str()).unwrap().1;
        terms.push((s, 1.0));
        m.add_constraint(format!("bal_{}", bus.id), terms, Relation::Eq, 0.0);
    }
    m.set_objective(
        served.iter().map(|&(_, s)| (s, -1.0)).collect(),
        grid.total_load(),
    );
    let report = solve(&m, &SolveParams::exact()).unwrap();
    match report.status {
        SolveStatus::Optimal => Some(report.objective_value),
        SolveStatus::Infeasible => None,
        other => panic!("oracle LP ended with {other}"),
    }
}

/// Every integer hardening plan within the tightened caps; a substation is
/// chosen exactly when its height is positive.
pub fn enumerate_plans(grid: &Grid, scenarios: &ScenarioSet) -> Vec<HardeningPlan> {
    let caps: Vec<(SubstationId, u32)> = tightened_heights(grid, scenarios).into_iter().collect();
    let mut plans = vec![HardeningPlan::zero()];
    for (sub, cap) in &caps {
        let mut next = Vec::with_capacity(plans.len() * (*cap as usize + 1));
        for plan in &plans {
            for h in 0..=*cap {
                let mut heights: BTreeMap<SubstationId, u32> = caps
                    .iter()
                    .map(|(s, _)| (s.clone(), plan.height(s)))
                    .collect();
                heights.insert(sub.clone(), h);
                next.push(HardeningPlan::from_heights(grid, heights));
            }
        }
        plans = next;
    }
    plans.dedup_by(|a, b| a == b);
    plans
}

/// Cached per-plan, per-scenario sheds (per-unit), the basis for every
/// plan-space oracle.
pub struct PlanTable {
    pub plans: Vec<HardeningPlan>,
    /// sheds[p][k], per-unit.
    pub sheds: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

impl PlanTable {
    pub fn build(grid: &Grid, scenarios: &ScenarioSet) -> Self {
        let plans = enumerate_plans(grid, scenarios);
        let sheds = plans
            .iter()
            .map(|plan| {
                scenarios
                    .scenarios()
                    .iter()
                    .map(|k| oracle_recourse_shed(grid, plan, k))
                    .collect()
            })
            .collect();
        PlanTable {
            plans,
            sheds,
            probabilities: scenarios.scenarios().iter().map(|s| s.probability).collect(),
        }
    }

    pub fn expected(&self, plan_idx: usize) -> f64 {
        self.sheds[plan_idx]
            .iter()
            .zip(&self.probabilities)
            .map(|(shed, p)| shed * p)
            .sum()
    }

    pub fn worst(&self, plan_idx: usize) -> f64 {
        self.sheds[plan_idx].iter().copied().fold(0.0, f64::max)
    }

    fn optimum(&self, budget: f64, measure: impl Fn(usize) -> f64) -> f64 {
        self.plans
            .iter()
            .enumerate()
            .filter(|(_, plan)| plan.cost() <= budget + 1e-9)
            .map(|(i, _)| measure(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Exhaustive stochastic optimum, per-unit.
    pub fn so_optimum(&self, budget: f64) -> f64 {
        self.optimum(budget, |i| self.expected(i))
    }

    /// Exhaustive robust optimum, per-unit.
    pub fn ro_optimum(&self, budget: f64) -> f64 {
        self.optimum(budget, |i| self.worst(i))
    }

    /// Cheapest plan achieving zero shed everywhere, if any.
    pub fn min_zero_shed_budget(&self) -> Option<f64> {
        self.plans
            .iter()
            .enumerate()
            .filter(|(i, _)| self.worst(*i) < 1e-9)
            .map(|(_, plan)| plan.cost())
            .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))))
    }

    /// Exhaustive total-disaster-cost optimum: `omega * expected MW + cost`.
    /// Returns `(total cost, hardening expenditure)`.
    pub fn tdm_optimum(&self, omega: f64, base_mva: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for (i, plan) in self.plans.iter().enumerate() {
            let total = omega * self.expected(i) * base_mva + plan.cost();
            if total < best.0 - 1e-12 {
                best = (total, plan.cost());
            }
        }
        best
    }

    /// Indices of plans optimal for the stochastic objective at a budget.
    pub fn so_optimal_plans(&self, budget: f64, tol: f64) -> Vec<usize> {
        let best = self.so_optimum(budget);
        self.plans
            .iter()
            .enumerate()
            .filter(|(i, plan)| plan.cost() <= budget + 1e-9 && self.expected(*i) <= best + tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Pure-integer enumeration optimum for solver validation. Panics if any
/// variable is continuous or unbounded.
pub fn enumerate_integer_optimum(model: &MilpModel) -> Option<f64> {
    let vars = model.variables();
    let ranges: Vec<(i64, i64)> = vars
        .iter()
        .map(|v| {
            assert!(v.kind.is_integral(), "enumeration needs integral variables");
            assert!(v.lower.is_finite() && v.upper.is_finite());
            ((v.lower - 1e-9).ceil() as i64, (v.upper + 1e-9).floor() as i64)
        })
        .collect();
    let mut assignment = vec![0i64; vars.len()];
    let mut best: Option<f64> = None;
    enumerate_rec(model, &ranges, &mut assignment, 0, &mut best);
    best
}

fn enumerate_rec(
    model: &MilpModel,
    ranges: &[(i64, i64)],
    assignment: &mut [i64],
    depth: usize,
    best: &mut Option<f64>,
) {
    if depth == ranges.len() {
        for c in model.constraints() {
            let lhs: f64 = c
                .terms
                .iter()
                .map(|&(v, coeff)| coeff * assignment[v.index()] as f64)
                .sum();
            let ok = match c.relation {
                Relation::Le => lhs <= c.rhs + 1e-9,
                Relation::Ge => lhs >= c.rhs - 1e-9,
                Relation::Eq => (lhs - c.rhs).abs() <= 1e-9,
            };
            if !ok {
                return;
            }
        }
        let obj = model.objective_constant()
            + model
                .objective()
                .iter()
                .map(|&(v, coeff)| coeff * assignment[v.index()] as f64)
                .sum::<f64>();
        if best.map_or(true, |b| obj < b) {
            *best = Some(obj);
        }
        return;
    }
    let (lo, hi) = ranges[depth];
    for v in lo..=hi {
        assignment[depth] = v;
        enumerate_rec(model, ranges, assignment, depth + 1, best);
    }
}
