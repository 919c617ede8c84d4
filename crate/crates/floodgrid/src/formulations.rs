//! Translation of a grid and scenario set into MILP instances: the
//! two-stage stochastic (expected shed) and robust (worst-case shed) models,
//! the single-scenario mean-value and wait-and-see problems, the minimum
//! zero-shed budget variant, and the total-disaster-cost variant that prices
//! shed against hardening expenditure.
//!
//! Tightening applied throughout: hardening heights are capped at the maximum
//! observed flood depth, the two linking constraints use their smallest valid
//! big-M values, and the Ohm's-law relaxation uses `F + 2*pi*B` per branch.
//! A substation survives a scenario exactly when its hardening height is at
//! least the flood depth; on integer data the linking pair pins the bus
//! status binaries to that rule.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use thiserror::Error;

use crate::grid::{Branch, BranchId, BusId, Grid, SubstationId};
use crate::milp::{MilpModel, Relation, VarId, VarKind};
use crate::scenario::{FloodScenario, ScenarioError, ScenarioId, ScenarioSet};

/// First-stage decisions: which substations to harden and to what height.
#[derive(Debug, Clone, PartialEq)]
pub struct HardeningPlan {
    chosen: BTreeMap<SubstationId, bool>,
    height: BTreeMap<SubstationId, u32>,
    cost: f64,
}

impl HardeningPlan {
    /// The do-nothing plan.
    pub fn zero() -> Self {
        HardeningPlan {
            chosen: BTreeMap::new(),
            height: BTreeMap::new(),
            cost: 0.0,
        }
    }

    /// Plan from heights alone; a substation is chosen iff its height is
    /// positive. Cost follows from the grid's cost parameters.
    pub fn from_heights(grid: &Grid, heights: BTreeMap<SubstationId, u32>) -> Self {
        let chosen = heights
            .iter()
            .filter(|(_, &h)| h > 0)
            .map(|(s, _)| (s.clone(), true))
            .collect();
        let height: BTreeMap<_, _> = heights.into_iter().filter(|(_, h)| *h > 0).collect();
        let mut plan = HardeningPlan {
            chosen,
            height,
            cost: 0.0,
        };
        plan.cost = plan.compute_cost(grid);
        plan
    }

    /// Plan from explicit choice and height maps, as extracted from a solver
    /// assignment (a substation may be chosen at height zero).
    pub fn from_parts(
        grid: &Grid,
        chosen: BTreeMap<SubstationId, bool>,
        height: BTreeMap<SubstationId, u32>,
    ) -> Self {
        let mut plan = HardeningPlan {
            chosen,
            height,
            cost: 0.0,
        };
        plan.cost = plan.compute_cost(grid);
        plan
    }

    fn compute_cost(&self, grid: &Grid) -> f64 {
        grid.substations
            .iter()
            .map(|s| {
                let fixed = if self.chosen(&s.id) { s.fixed_cost } else { 0.0 };
                fixed + s.variable_cost * f64::from(self.height(&s.id))
            })
            .sum()
    }

    pub fn chosen(&self, id: &SubstationId) -> bool {
        self.chosen.get(id).copied().unwrap_or(false)
    }

    pub fn height(&self, id: &SubstationId) -> u32 {
        self.height.get(id).copied().unwrap_or(0)
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn is_zero(&self) -> bool {
        self.chosen.values().all(|&c| !c) && self.height.values().all(|&h| h == 0)
    }

    /// Checks the plan invariants: positive height implies chosen, heights
    /// respect `min(H_i, W_i)`, and the stored cost is consistent.
    pub fn validate(&self, grid: &Grid, scenarios: &ScenarioSet) -> Result<(), FormulationError> {
        for (sub, &h) in &self.height {
            if h == 0 {
                continue;
            }
            if !self.chosen(sub) {
                return Err(FormulationError::InvalidPlan(format!(
                    "substation {sub} has height {h} but is not chosen"
                )));
            }
            let Some(record) = grid.substation(sub) else {
                return Err(FormulationError::InvalidPlan(format!(
                    "plan references unknown substation {sub}"
                )));
            };
            let cap = record.max_harden.min(scenarios.max_depth(sub));
            if h > cap {
                return Err(FormulationError::InvalidPlan(format!(
                    "substation {sub} hardened to {h} ft, above its cap of {cap} ft"
                )));
            }
        }
        let expected = self.compute_cost(grid);
        if (expected - self.cost).abs() > 1e-6 {
            return Err(FormulationError::InvalidPlan(format!(
                "plan cost {} disagrees with recomputed cost {expected}",
                self.cost
            )));
        }
        Ok(())
    }

    /// A substation survives a flood depth iff hardened at least that high.
    pub fn survives(&self, substation: &SubstationId, depth: u32) -> bool {
        self.height(substation) >= depth
    }
}

/// Planning-horizon economics: expected hurricane count, restoration hours,
/// and value of lost load, collapsed into `omega = gamma * h * delta`
/// (dollars per megawatt of shed).
#[derive(Debug, Clone, PartialEq)]
pub struct StudyParams {
    pub hurricanes: f64,
    pub restore_hours: f64,
    pub voll: f64,
    pub omega: f64,
    pub budget: f64,
}

impl StudyParams {
    pub fn new(
        hurricanes: f64,
        restore_hours: f64,
        voll: f64,
        budget: f64,
    ) -> Result<Self, FormulationError> {
        for (name, v) in [
            ("hurricanes", hurricanes),
            ("restore_hours", restore_hours),
            ("voll", voll),
            ("budget", budget),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(FormulationError::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(StudyParams {
            hurricanes,
            restore_hours,
            voll,
            omega: hurricanes * restore_hours * voll,
            budget,
        })
    }

    /// Params from a direct omega value, for callers that reason in
    /// dollars-per-MWh terms without separate gamma/h/delta inputs.
    pub fn from_omega(omega: f64, budget: f64) -> Result<Self, FormulationError> {
        Self::new(omega, 1.0, 1.0, budget)
    }
}

/// Second-stage solution for one scenario block, in grid units.
#[derive(Debug, Clone)]
pub struct RecourseSolution {
    pub bus_on: BTreeMap<BusId, bool>,
    pub served: BTreeMap<BusId, f64>,
    pub generated: BTreeMap<BusId, f64>,
    pub gen_on: BTreeMap<BusId, bool>,
    pub angle: BTreeMap<BusId, f64>,
    pub flow: BTreeMap<BranchId, f64>,
    /// Unserved demand, per-unit.
    pub shed: f64,
}

/// Knobs that do not change a model's meaning. `big_m_scale` inflates every
/// big-M, which must leave optima unchanged. `shed_objective_scale`
/// multiplies the shed objective of the expected- and worst-case models by a
/// positive constant, which must leave the optimal plan set unchanged; tests
/// rely on both.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub big_m_scale: f64,
    pub shed_objective_scale: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            big_m_scale: 1.0,
            shed_objective_scale: 1.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("invalid hardening plan: {0}")]
    InvalidPlan(String),
    #[error("invalid study parameters: {0}")]
    InvalidParams(String),
    #[error("substation {0} is not flooded in any scenario")]
    NotFlooded(SubstationId),
    #[error("bus {0} does not exist")]
    UnknownBus(BusId),
    #[error("scenario {0} does not exist in the set")]
    UnknownScenario(ScenarioId),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Hardening caps after tightening: `min(H_i, W_i)` per flooded substation.
pub fn tightened_heights(grid: &Grid, scenarios: &ScenarioSet) -> BTreeMap<SubstationId, u32> {
    scenarios
        .flooded_substations()
        .iter()
        .map(|sub| {
            let h = grid.substation(sub).map_or(0, |s| s.max_harden);
            (sub.clone(), h.min(scenarios.max_depth(sub)))
        })
        .collect()
}

/// Smallest valid big-M pair for the two linking constraints at a bus whose
/// substation floods somewhere: `(W, min(H, W) + 0.5)`.
pub fn linking_big_m(
    grid: &Grid,
    scenarios: &ScenarioSet,
    bus: &BusId,
) -> Result<(f64, f64), FormulationError> {
    let bus = grid
        .bus(bus)
        .ok_or_else(|| FormulationError::UnknownBus(bus.clone()))?;
    let sub = &bus.substation_id;
    if !scenarios.is_flooded(sub) {
        return Err(FormulationError::NotFlooded(sub.clone()));
    }
    let w = scenarios.max_depth(sub);
    let h = grid.substation(sub).map_or(0, |s| s.max_harden);
    Ok((f64::from(w), f64::from(h.min(w)) + 0.5))
}

/// Smallest valid big-M for the Ohm's-law relaxation on a branch.
pub fn ohm_big_m(branch: &Branch) -> f64 {
    branch.capacity + 2.0 * PI * branch.susceptance
}

fn y_name(sub: &SubstationId) -> String {
    format!("y[{sub}]")
}
fn x_name(sub: &SubstationId) -> String {
    format!("x[{sub}]")
}
fn block_var(prefix: &str, id: &impl std::fmt::Display, block: &ScenarioId) -> String {
    format!("{prefix}[{id},{block}]")
}

enum FirstStage<'a> {
    Free { budget: Option<f64> },
    Fixed(&'a HardeningPlan),
}

enum ObjectiveKind {
    /// Probability-weighted per-unit shed.
    ExpectedShed,
    /// Epigraph of the per-scenario sheds, per-unit.
    WorstCaseShed,
    /// Hardening expenditure with full demand satisfaction forced.
    HardeningCost,
    /// omega * shed-in-MW (expected or worst case) plus hardening cost.
    TotalCost { omega: f64, worst_case: bool },
}

/// A built model plus the metadata needed to read solutions back out.
#[derive(Debug, Clone)]
pub struct StageModel {
    pub model: MilpModel,
    /// Scenario blocks in model order.
    pub blocks: Vec<FloodScenario>,
    pub has_first_stage: bool,
    pub has_tau: bool,
}

impl StageModel {
    /// Per-unit shed of one block under an assignment.
    pub fn block_shed(
        &self,
        grid: &Grid,
        assignment: &BTreeMap<String, f64>,
        block: usize,
    ) -> f64 {
        let id = &self.blocks[block].id;
        let served: f64 = grid
            .buses
            .iter()
            .filter_map(|b| assignment.get(&block_var("s", &b.id, id)))
            .sum();
        grid.total_load() - served
    }

    /// The always-feasible shutdown completion of a plan: hardening as given,
    /// no generation, no service, bus states pinned by the linkage rule. Used
    /// to seed solves, per the models' relatively complete recourse.
    pub fn shutdown_assignment(&self, grid: &Grid, plan: &HardeningPlan) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for var in self.model.variables() {
            // Flows and angles rest at zero; everything else sits on its
            // lower bound (zero, or the forced demand in full-supply models).
            let value = if var.name.starts_with("e[") || var.name.starts_with("alpha[") {
                0.0
            } else {
                var.lower
            };
            out.insert(var.name.clone(), value);
        }
        if self.has_first_stage {
            for sub in &grid.substations {
                if let Some(v) = out.get_mut(&y_name(&sub.id)) {
                    *v = if plan.chosen(&sub.id) { 1.0 } else { 0.0 };
                }
                if let Some(v) = out.get_mut(&x_name(&sub.id)) {
                    *v = f64::from(plan.height(&sub.id));
                }
            }
        }
        for block in &self.blocks {
            for bus in &grid.buses {
                let name = block_var("z", &bus.id, &block.id);
                if let Some(v) = out.get_mut(&name) {
                    let depth = block.depth(&bus.substation_id);
                    *v = if plan.survives(&bus.substation_id, depth) {
                        1.0
                    } else {
                        0.0
                    };
                }
            }
        }
        if self.has_tau {
            out.insert("tau".to_string(), grid.total_load());
        }
        out
    }

    /// Reads the first-stage decisions out of an assignment.
    pub fn extract_plan(&self, grid: &Grid, assignment: &BTreeMap<String, f64>) -> HardeningPlan {
        extract_plan(grid, assignment)
    }

    /// Reads one block's second-stage solution out of an assignment.
    pub fn extract_recourse(
        &self,
        grid: &Grid,
        assignment: &BTreeMap<String, f64>,
        block: usize,
    ) -> RecourseSolution {
        let id = &self.blocks[block].id;
        let mut bus_on = BTreeMap::new();
        let mut served = BTreeMap::new();
        let mut generated = BTreeMap::new();
        let mut gen_on = BTreeMap::new();
        let mut angle = BTreeMap::new();
        let mut flow = BTreeMap::new();
        for bus in &grid.buses {
            let z = assignment
                .get(&block_var("z", &bus.id, id))
                .map_or(true, |&v| v > 0.5);
            let s = assignment
                .get(&block_var("s", &bus.id, id))
                .copied()
                .unwrap_or(0.0);
            let g = assignment
                .get(&block_var("g", &bus.id, id))
                .copied()
                .unwrap_or(0.0);
            let u = assignment
                .get(&block_var("u", &bus.id, id))
                .map_or(g > 1e-6, |&v| v > 0.5);
            let a = assignment
                .get(&block_var("alpha", &bus.id, id))
                .copied()
                .unwrap_or(0.0);
            bus_on.insert(bus.id.clone(), z);
            served.insert(bus.id.clone(), s);
            generated.insert(bus.id.clone(), g);
            gen_on.insert(bus.id.clone(), u);
            angle.insert(bus.id.clone(), a);
        }
        for branch in &grid.branches {
            let e = assignment
                .get(&block_var("e", &branch.id, id))
                .copied()
                .unwrap_or(0.0);
            flow.insert(branch.id.clone(), e);
        }
        let shed = grid.total_load() - served.values().sum::<f64>();
        RecourseSolution {
            bus_on,
            served,
            generated,
            gen_on,
            angle,
            flow,
            shed,
        }
    }
}

/// Reads first-stage decisions out of any assignment using the deterministic
/// variable names; substations without variables are unhardened.
pub fn extract_plan(grid: &Grid, assignment: &BTreeMap<String, f64>) -> HardeningPlan {
    let mut chosen = BTreeMap::new();
    let mut height = BTreeMap::new();
    for sub in &grid.substations {
        if let Some(&y) = assignment.get(&y_name(&sub.id)) {
            if y > 0.5 {
                chosen.insert(sub.id.clone(), true);
            }
        }
        if let Some(&x) = assignment.get(&x_name(&sub.id)) {
            let h = x.round().max(0.0) as u32;
            if h > 0 {
                height.insert(sub.id.clone(), h);
            }
        }
    }
    HardeningPlan::from_parts(grid, chosen, height)
}

struct Builder<'a> {
    grid: &'a Grid,
    scenarios: &'a ScenarioSet,
    opts: &'a BuildOptions,
    model: MilpModel,
    /// First-stage height variable per flooded substation, when free.
    x_vars: BTreeMap<SubstationId, VarId>,
    objective: Vec<(VarId, f64)>,
    objective_constant: f64,
}

impl<'a> Builder<'a> {
    fn new(
        name: &str,
        grid: &'a Grid,
        scenarios: &'a ScenarioSet,
        opts: &'a BuildOptions,
    ) -> Self {
        Builder {
            grid,
            scenarios,
            opts,
            model: MilpModel::new(name),
            x_vars: BTreeMap::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
        }
    }

    fn add_first_stage(&mut self, budget: Option<f64>, price_into_objective: bool) {
        let caps = tightened_heights(self.grid, self.scenarios);
        let mut budget_terms = Vec::new();
        for sub in &self.grid.substations {
            let Some(&cap) = caps.get(&sub.id) else { continue };
            let y = self
                .model
                .add_var(y_name(&sub.id), VarKind::Binary, 0.0, 1.0);
            let x = self
                .model
                .add_var(x_name(&sub.id), VarKind::Integer, 0.0, f64::from(cap));
            self.model.add_constraint(
                format!("tie[{}]", sub.id),
                vec![(x, 1.0), (y, -f64::from(cap))],
                Relation::Le,
                0.0,
            );
            budget_terms.push((y, sub.fixed_cost));
            budget_terms.push((x, sub.variable_cost));
            self.x_vars.insert(sub.id.clone(), x);
        }
        if let Some(limit) = budget {
            if !budget_terms.is_empty() {
                self.model
                    .add_constraint("budget", budget_terms.clone(), Relation::Le, limit);
            }
        }
        if price_into_objective {
            self.objective.extend(budget_terms);
        }
    }

    /// Adds one scenario block. `shed_weight` is the objective coefficient
    /// applied to this block's shed (zero when the objective does not price
    /// shed directly, e.g. epigraph or cost-minimization variants). Returns
    /// the block's served-power variables for epigraph rows.
    fn add_block(
        &mut self,
        scenario: &FloodScenario,
        plan: Option<&HardeningPlan>,
        shed_weight: f64,
        force_full_supply: bool,
    ) -> Vec<VarId> {
        let grid = self.grid;
        let k = &scenario.id;
        let scale = self.opts.big_m_scale;

        // Bus-level variables and rows.
        let mut z_vars: BTreeMap<&BusId, VarId> = BTreeMap::new();
        let mut s_vars = Vec::with_capacity(grid.buses.len());
        let mut g_vars: BTreeMap<&BusId, VarId> = BTreeMap::new();
        let mut alpha_vars: BTreeMap<&BusId, VarId> = BTreeMap::new();
        for bus in &grid.buses {
            let sub = &bus.substation_id;
            let flooded_set = self.scenarios.is_flooded(sub);
            let depth = f64::from(scenario.depth(sub));

            let z = if flooded_set {
                let z = self
                    .model
                    .add_var(block_var("z", &bus.id, k), VarKind::Binary, 0.0, 1.0);
                let (m_lo, m_hi) = linking_big_m(grid, self.scenarios, &bus.id)
                    .expect("bus of a flooded substation");
                let w = m_lo * scale;
                let m_hi = m_hi * scale;
                match plan {
                    None => {
                        let x = self.x_vars[sub];
                        self.model.add_constraint(
                            format!("link_lo[{},{k}]", bus.id),
                            vec![(x, 1.0), (z, -w)],
                            Relation::Ge,
                            depth - w,
                        );
                        self.model.add_constraint(
                            format!("link_hi[{},{k}]", bus.id),
                            vec![(z, 2.0 * m_hi), (x, -2.0)],
                            Relation::Ge,
                            1.0 - 2.0 * depth,
                        );
                    }
                    Some(plan) => {
                        let x = f64::from(plan.height(sub));
                        self.model.add_constraint(
                            format!("link_lo[{},{k}]", bus.id),
                            vec![(z, -w)],
                            Relation::Ge,
                            depth - x - w,
                        );
                        self.model.add_constraint(
                            format!("link_hi[{},{k}]", bus.id),
                            vec![(z, 2.0 * m_hi)],
                            Relation::Ge,
                            1.0 - 2.0 * (depth - x),
                        );
                    }
                }
                Some(z)
            } else {
                None // operational by construction
            };

            let s = if force_full_supply {
                self.model.add_var(
                    block_var("s", &bus.id, k),
                    VarKind::Continuous,
                    bus.load,
                    bus.load,
                )
            } else {
                let s = self.model.add_var(
                    block_var("s", &bus.id, k),
                    VarKind::Continuous,
                    0.0,
                    bus.load,
                );
                if let Some(z) = z {
                    if bus.load > 0.0 {
                        self.model.add_constraint(
                            format!("sup[{},{k}]", bus.id),
                            vec![(s, 1.0), (z, -bus.load)],
                            Relation::Le,
                            0.0,
                        );
                    }
                }
                s
            };
            s_vars.push(s);

            let g = self.model.add_var(
                block_var("g", &bus.id, k),
                VarKind::Continuous,
                0.0,
                bus.gen_max,
            );
            if bus.gen_max > 0.0 {
                if bus.gen_min > 0.0 {
                    let u = self
                        .model
                        .add_var(block_var("u", &bus.id, k), VarKind::Binary, 0.0, 1.0);
                    if let Some(z) = z {
                        self.model.add_constraint(
                            format!("uz[{},{k}]", bus.id),
                            vec![(u, 1.0), (z, -1.0)],
                            Relation::Le,
                            0.0,
                        );
                    }
                    self.model.add_constraint(
                        format!("gen_hi[{},{k}]", bus.id),
                        vec![(g, 1.0), (u, -bus.gen_max)],
                        Relation::Le,
                        0.0,
                    );
                    self.model.add_constraint(
                        format!("gen_lo[{},{k}]", bus.id),
                        vec![(g, 1.0), (u, -bus.gen_min)],
                        Relation::Ge,
                        0.0,
                    );
                } else if let Some(z) = z {
                    // No commitment binary needed when the generator has no
                    // minimum output; the exact reformulation is g <= G_max z.
                    self.model.add_constraint(
                        format!("gen_hi[{},{k}]", bus.id),
                        vec![(g, 1.0), (z, -bus.gen_max)],
                        Relation::Le,
                        0.0,
                    );
                }
            }
            g_vars.insert(&bus.id, g);

            let (lo, hi) = if bus.is_reference {
                (0.0, 0.0)
            } else {
                (-PI, PI)
            };
            let alpha =
                self.model
                    .add_var(block_var("alpha", &bus.id, k), VarKind::Continuous, lo, hi);
            alpha_vars.insert(&bus.id, alpha);
            if let Some(z) = z {
                z_vars.insert(&bus.id, z);
            }
        }

        // Branch flows: endpoint capacity linkage and the Ohm's-law band.
        let mut flow_vars: BTreeMap<&BranchId, VarId> = BTreeMap::new();
        for branch in &grid.branches {
            let e = self.model.add_var(
                block_var("e", &branch.id, k),
                VarKind::Continuous,
                -branch.capacity,
                branch.capacity,
            );
            flow_vars.insert(&branch.id, e);
            for (tag, bus_id) in [("f", &branch.from_bus), ("t", &branch.to_bus)] {
                if let Some(&z) = z_vars.get(bus_id) {
                    self.model.add_constraint(
                        format!("cap{tag}_hi[{},{k}]", branch.id),
                        vec![(e, 1.0), (z, -branch.capacity)],
                        Relation::Le,
                        0.0,
                    );
                    self.model.add_constraint(
                        format!("cap{tag}_lo[{},{k}]", branch.id),
                        vec![(e, 1.0), (z, branch.capacity)],
                        Relation::Ge,
                        0.0,
                    );
                }
            }

            let m = ohm_big_m(branch) * scale;
            let b = branch.susceptance;
            let a_from = alpha_vars[&branch.from_bus];
            let a_to = alpha_vars[&branch.to_bus];
            let mut lo_terms = vec![(a_from, b), (a_to, -b), (e, -1.0)];
            let mut hi_terms = lo_terms.clone();
            let mut lo_rhs = -2.0 * m;
            let mut hi_rhs = 2.0 * m;
            for bus_id in [&branch.from_bus, &branch.to_bus] {
                match z_vars.get(bus_id) {
                    Some(&z) => {
                        lo_terms.push((z, -m));
                        hi_terms.push((z, m));
                    }
                    None => {
                        lo_rhs += m;
                        hi_rhs -= m;
                    }
                }
            }
            self.model.add_constraint(
                format!("ohm_lo[{},{k}]", branch.id),
                lo_terms,
                Relation::Ge,
                lo_rhs,
            );
            self.model.add_constraint(
                format!("ohm_hi[{},{k}]", branch.id),
                hi_terms,
                Relation::Le,
                hi_rhs,
            );
        }

        // Power balance: outflow minus inflow equals generation minus service.
        for bus in &grid.buses {
            let mut terms = Vec::new();
            for branch in &grid.branches {
                if branch.from_bus == bus.id {
                    terms.push((flow_vars[&branch.id], 1.0));
                }
                if branch.to_bus == bus.id {
                    terms.push((flow_vars[&branch.id], -1.0));
                }
            }
            let g = g_vars[&bus.id];
            let s = s_vars[grid.buses.iter().position(|b| b.id == bus.id).unwrap()];
            terms.push((g, -1.0));
            terms.push((s, 1.0));
            self.model.add_constraint(
                format!("bal[{},{k}]", bus.id),
                terms,
                Relation::Eq,
                0.0,
            );
        }

        if shed_weight != 0.0 {
            for &s in &s_vars {
                self.objective.push((s, -shed_weight));
            }
            self.objective_constant += shed_weight * grid.total_load();
        }
        s_vars
    }

    fn finish(mut self) -> MilpModel {
        self.model.set_objective(self.objective, self.objective_constant);
        self.model
    }
}

fn build(
    name: &str,
    grid: &Grid,
    scenarios: &ScenarioSet,
    blocks: &[(&FloodScenario, f64)],
    first_stage: FirstStage<'_>,
    objective: ObjectiveKind,
    opts: &BuildOptions,
) -> StageModel {
    let mut b = Builder::new(name, grid, scenarios, opts);

    let (plan, has_first_stage) = match &first_stage {
        FirstStage::Free { budget } => {
            let price_cost = matches!(
                objective,
                ObjectiveKind::HardeningCost | ObjectiveKind::TotalCost { .. }
            );
            b.add_first_stage(*budget, price_cost);
            (None, true)
        }
        FirstStage::Fixed(plan) => (Some(*plan), false),
    };

    let force_full_supply = matches!(objective, ObjectiveKind::HardeningCost);
    let shed_mw = grid.base_mva;
    let mut tau: Option<VarId> = None;
    let mut block_served: Vec<Vec<VarId>> = Vec::with_capacity(blocks.len());
    for (scenario, weight) in blocks {
        let shed_weight = match objective {
            ObjectiveKind::ExpectedShed => weight * opts.shed_objective_scale,
            ObjectiveKind::TotalCost { omega, worst_case: false } => weight * omega * shed_mw,
            _ => 0.0,
        };
        let served = b.add_block(scenario, plan, shed_weight, force_full_supply);
        block_served.push(served);
    }

    let worst_case = matches!(
        objective,
        ObjectiveKind::WorstCaseShed | ObjectiveKind::TotalCost { worst_case: true, .. }
    );
    if worst_case {
        let t = b
            .model
            .add_var("tau", VarKind::Continuous, 0.0, grid.total_load());
        let total = grid.total_load();
        for ((scenario, _), served) in blocks.iter().zip(&block_served) {
            let mut terms = vec![(t, 1.0)];
            terms.extend(served.iter().map(|&s| (s, 1.0)));
            b.model.add_constraint(
                format!("epi[{}]", scenario.id),
                terms,
                Relation::Ge,
                total,
            );
        }
        let tau_weight = match objective {
            ObjectiveKind::WorstCaseShed => opts.shed_objective_scale,
            ObjectiveKind::TotalCost { omega, .. } => omega * shed_mw,
            _ => unreachable!(),
        };
        b.objective.push((t, tau_weight));
        tau = Some(t);
    }

    StageModel {
        model: b.finish(),
        blocks: blocks.iter().map(|(s, _)| (*s).clone()).collect(),
        has_first_stage,
        has_tau: tau.is_some(),
    }
}

fn weighted_blocks(scenarios: &ScenarioSet) -> Vec<(&FloodScenario, f64)> {
    scenarios
        .scenarios()
        .iter()
        .map(|s| (s, s.probability))
        .collect()
}

/// The second-stage problem for a fixed plan and one scenario; its optimum is
/// the minimum load shed, per-unit.
pub fn build_recourse(
    grid: &Grid,
    scenarios: &ScenarioSet,
    plan: &HardeningPlan,
    scenario: &FloodScenario,
    opts: &BuildOptions,
) -> Result<StageModel, FormulationError> {
    plan.validate(grid, scenarios)?;
    Ok(build(
        &format!("recourse_{}", scenario.id),
        grid,
        scenarios,
        &[(scenario, 1.0)],
        FirstStage::Fixed(plan),
        ObjectiveKind::ExpectedShed,
        opts,
    ))
}

/// Two-stage stochastic model: minimize expected shed under a budget.
pub fn build_so(
    grid: &Grid,
    scenarios: &ScenarioSet,
    budget: f64,
    opts: &BuildOptions,
) -> StageModel {
    build(
        "so",
        grid,
        scenarios,
        &weighted_blocks(scenarios),
        FirstStage::Free { budget: Some(budget) },
        ObjectiveKind::ExpectedShed,
        opts,
    )
}

/// Two-stage robust model: minimize the worst-case shed under a budget.
/// Scenario probabilities are not used.
pub fn build_ro(
    grid: &Grid,
    scenarios: &ScenarioSet,
    budget: f64,
    opts: &BuildOptions,
) -> StageModel {
    build(
        "ro",
        grid,
        scenarios,
        &weighted_blocks(scenarios),
        FirstStage::Free { budget: Some(budget) },
        ObjectiveKind::WorstCaseShed,
        opts,
    )
}

/// Minimum hardening expenditure such that no scenario sheds load: the
/// budget row is dropped, expenditure becomes the objective, and full demand
/// satisfaction is forced in every block. Infeasibility means even full
/// hardening cannot serve all load.
pub fn build_min_budget_zero_shed(
    grid: &Grid,
    scenarios: &ScenarioSet,
    opts: &BuildOptions,
) -> StageModel {
    build(
        "min_budget",
        grid,
        scenarios,
        &weighted_blocks(scenarios),
        FirstStage::Free { budget: None },
        ObjectiveKind::HardeningCost,
        opts,
    )
}

/// The mean-value problem: a single-scenario model at the probability-
/// weighted mean flood depths. Its optimal plan is the expected value
/// solution. Returns the model together with the synthetic singleton set it
/// was built against.
pub fn build_ev(
    grid: &Grid,
    scenarios: &ScenarioSet,
    budget: f64,
    opts: &BuildOptions,
) -> Result<(StageModel, ScenarioSet), FormulationError> {
    let mean = scenarios.mean_scenario();
    let mean_set = ScenarioSet::new(vec![mean], grid)?;
    let blocks: Vec<_> = mean_set.scenarios().iter().map(|s| (s, 1.0)).collect();
    let model = build(
        "ev",
        grid,
        &mean_set,
        &blocks,
        FirstStage::Free { budget: Some(budget) },
        ObjectiveKind::ExpectedShed,
        opts,
    );
    Ok((model, mean_set))
}

/// The wait-and-see problem for one scenario: first-stage decisions chosen
/// with that scenario known. The probability-weighted sum of these optima is
/// the wait-and-see bound.
pub fn build_ws(
    grid: &Grid,
    scenarios: &ScenarioSet,
    scenario: &ScenarioId,
    budget: f64,
    opts: &BuildOptions,
) -> Result<StageModel, FormulationError> {
    let s = scenarios
        .scenario(scenario)
        .ok_or_else(|| FormulationError::UnknownScenario(scenario.clone()))?;
    Ok(build(
        &format!("ws_{scenario}"),
        grid,
        scenarios,
        &[(s, 1.0)],
        FirstStage::Free { budget: Some(budget) },
        ObjectiveKind::ExpectedShed,
        opts,
    ))
}

/// Total disaster management cost: omega-weighted shed (in MW, converted via
/// the grid's MVA base) plus hardening expenditure, with no budget row. The
/// hardening expenditure at the optimum is the optimal investment budget.
pub fn build_tdm(
    grid: &Grid,
    scenarios: &ScenarioSet,
    params: &StudyParams,
    worst_case: bool,
    opts: &BuildOptions,
) -> StageModel {
    build(
        if worst_case { "tdm_ro" } else { "tdm_so" },
        grid,
        scenarios,
        &weighted_blocks(scenarios),
        FirstStage::Free { budget: None },
        ObjectiveKind::TotalCost { omega: params.omega, worst_case },
        opts,
    )
}
