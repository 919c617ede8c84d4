//! Best-bound branch and bound over the simplex relaxation.
//!
//! Node selection is best bound first with FIFO tie-breaking, branching picks
//! the most fractional integer variable with lowest-index tie-breaking, and
//! every rule is deterministic so repeated solves replay identically.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::simplex::{solve_lp, LpOutcome, LpProblem, LpRow};
use super::{
    check_feasible, relative_gap, MilpModel, SolveError, SolveParams, SolveReport, SolveStatus,
    INTEGRALITY_TOL,
};

/// Absolute slack used when pruning against the incumbent.
const PRUNE_EPS: f64 = 1e-9;

struct Node {
    bound: f64,
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    branch_var: usize,
    branch_value: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum; invert so the smallest bound (then the
        // oldest node) comes out first.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Evaluated {
    Infeasible,
    Unbounded,
    Integral { values: Vec<f64> },
    Fractional {
        objective: f64,
        branch_var: usize,
        branch_value: f64,
    },
}

fn build_problem(model: &MilpModel) -> LpProblem {
    LpProblem {
        num_cols: model.num_vars(),
        rows: model
            .constraints()
            .iter()
            .map(|c| LpRow {
                terms: c.terms.iter().map(|&(v, coeff)| (v.0, coeff)).collect(),
                relation: c.relation,
                rhs: c.rhs,
            })
            .collect(),
        objective: model.dense_objective(),
        objective_constant: model.objective_constant(),
    }
}

fn eval_objective(problem: &LpProblem, values: &[f64]) -> f64 {
    problem.objective_constant
        + values
            .iter()
            .zip(&problem.objective)
            .map(|(x, c)| x * c)
            .sum::<f64>()
}

fn evaluate(
    problem: &LpProblem,
    int_vars: &[usize],
    lower: &[f64],
    upper: &[f64],
) -> Result<Evaluated, SolveError> {
    match solve_lp(problem, lower, upper)? {
        LpOutcome::Infeasible => Ok(Evaluated::Infeasible),
        LpOutcome::Unbounded => Ok(Evaluated::Unbounded),
        LpOutcome::Optimal { values, objective } => {
            let mut branch: Option<(usize, f64, f64)> = None;
            for &j in int_vars {
                let v = values[j];
                let frac = (v - v.round()).abs();
                if frac > INTEGRALITY_TOL && branch.map_or(true, |(_, _, f)| frac > f + 1e-12) {
                    branch = Some((j, v, frac));
                }
            }
            Ok(match branch {
                None => Evaluated::Integral { values },
                Some((var, value, _)) => Evaluated::Fractional {
                    objective,
                    branch_var: var,
                    branch_value: value,
                },
            })
        }
    }
}

/// Re-optimizes the continuous part with the integer variables fixed at their
/// rounded values, yielding a clean incumbent for the original model.
fn polish(
    problem: &LpProblem,
    int_vars: &[usize],
    root_lower: &[f64],
    root_upper: &[f64],
    values: &[f64],
) -> (f64, Vec<f64>) {
    let mut lo = root_lower.to_vec();
    let mut up = root_upper.to_vec();
    for &j in int_vars {
        let r = values[j].round();
        lo[j] = r;
        up[j] = r;
    }
    match solve_lp(problem, &lo, &up) {
        Ok(LpOutcome::Optimal { values, objective }) => (objective, values),
        _ => (eval_objective(problem, values), values.to_vec()),
    }
}

pub(crate) fn solve(model: &MilpModel, params: &SolveParams) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let problem = build_problem(model);
    let int_vars: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind.is_integral())
        .map(|(i, _)| i)
        .collect();

    // Root bounds, with integer bounds snapped inward.
    let mut root_lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let mut root_upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    for &j in &int_vars {
        if root_lower[j].is_finite() {
            root_lower[j] = (root_lower[j] - 1e-9).ceil();
        }
        if root_upper[j].is_finite() {
            root_upper[j] = (root_upper[j] + 1e-9).floor();
        }
    }

    let report = |status: SolveStatus,
                  objective: f64,
                  bound: f64,
                  values: Option<&[f64]>,
                  nodes: u64,
                  root_incumbent: Option<f64>| {
        let assignment = values
            .map(|vals| {
                model
                    .variables()
                    .iter()
                    .zip(vals)
                    .map(|(v, &x)| (v.name.clone(), x))
                    .collect()
            })
            .unwrap_or_default();
        let gap = match status {
            SolveStatus::Optimal | SolveStatus::GapReached => relative_gap(objective, bound),
            _ if objective.is_finite() && bound.is_finite() => relative_gap(objective, bound),
            _ => f64::INFINITY,
        };
        SolveReport {
            status,
            objective_value: objective,
            best_bound: bound,
            gap,
            assignment,
            wall_time: start.elapsed().as_secs_f64(),
            node_count: nodes,
            root_incumbent,
        }
    };

    // Warm start: accepted only when it checks out feasible and integral.
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut root_incumbent = None;
    if let Some(ws) = &params.warm_start {
        match check_feasible(model, ws) {
            Ok(violations) if violations.is_empty() => {
                let values: Vec<f64> = model
                    .variables()
                    .iter()
                    .map(|v| ws[&v.name])
                    .collect();
                let objective = eval_objective(&problem, &values);
                root_incumbent = Some(objective);
                incumbent = Some((objective, values));
            }
            Ok(violations) => {
                log::warn!(
                    "warm start for {} dropped: {} violation(s), first: {}",
                    model.name,
                    violations.len(),
                    violations[0]
                );
            }
            Err(e) => {
                log::warn!("warm start for {} dropped: {e}", model.name);
            }
        }
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id: u64 = 0;
    let mut node_count: u64 = 0;

    node_count += 1;
    match evaluate(&problem, &int_vars, &root_lower, &root_upper)? {
        Evaluated::Unbounded => {
            return Ok(report(
                SolveStatus::Unbounded,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
                None,
                node_count,
                root_incumbent,
            ));
        }
        Evaluated::Infeasible => {
            // A feasible warm start with an infeasible relaxation cannot
            // happen on a consistent model; trust the relaxation.
            if incumbent.is_none() {
                return Ok(report(
                    SolveStatus::Infeasible,
                    f64::INFINITY,
                    f64::INFINITY,
                    None,
                    node_count,
                    root_incumbent,
                ));
            }
        }
        Evaluated::Integral { values, .. } => {
            let (obj, vals) = polish(&problem, &int_vars, &root_lower, &root_upper, &values);
            if incumbent.as_ref().map_or(true, |(inc, _)| obj < *inc) {
                incumbent = Some((obj, vals));
            }
        }
        Evaluated::Fractional {
            objective,
            branch_var,
            branch_value,
        } => {
            heap.push(Node {
                bound: objective,
                id: next_id,
                lower: root_lower.clone(),
                upper: root_upper.clone(),
                branch_var,
                branch_value,
            });
            next_id += 1;
        }
    }

    let time_limit = params.time_limit;
    loop {
        if let Some((inc, _)) = &incumbent {
            while heap
                .peek()
                .map_or(false, |n| n.bound >= *inc - PRUNE_EPS)
            {
                heap.pop();
            }
        }
        let heap_bound = heap.peek().map(|n| n.bound);
        if let (Some((inc, values)), Some(hb)) = (&incumbent, heap_bound) {
            let bound_now = hb.min(*inc);
            if relative_gap(*inc, bound_now) <= params.relative_gap {
                return Ok(report(
                    SolveStatus::GapReached,
                    *inc,
                    bound_now,
                    Some(values),
                    node_count,
                    root_incumbent,
                ));
            }
        }
        let Some(node) = heap.pop() else { break };
        if start.elapsed().as_secs_f64() > time_limit {
            let (obj, values) = match &incumbent {
                Some((inc, vals)) => (*inc, Some(vals.as_slice())),
                None => (f64::INFINITY, None),
            };
            return Ok(report(
                SolveStatus::TimeLimit,
                obj,
                node.bound.min(obj),
                values,
                node_count,
                root_incumbent,
            ));
        }

        let down = (node.branch_value - 1e-9).floor();
        let up = down + 1.0;
        for (child_lower_delta, child_upper_delta) in
            [(None, Some(down)), (Some(up), None)]
        {
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            if let Some(lo) = child_lower_delta {
                lower[node.branch_var] = lower[node.branch_var].max(lo);
            }
            if let Some(hi) = child_upper_delta {
                upper[node.branch_var] = upper[node.branch_var].min(hi);
            }
            if lower[node.branch_var] > upper[node.branch_var] {
                continue;
            }
            node_count += 1;
            match evaluate(&problem, &int_vars, &lower, &upper)? {
                Evaluated::Infeasible => {}
                Evaluated::Unbounded => {
                    return Err(SolveError::Numerical(
                        "bounded root with unbounded child relaxation".into(),
                    ));
                }
                Evaluated::Integral { values, .. } => {
                    let (obj, vals) =
                        polish(&problem, &int_vars, &root_lower, &root_upper, &values);
                    if incumbent.as_ref().map_or(true, |(inc, _)| obj < *inc) {
                        incumbent = Some((obj, vals));
                    }
                }
                Evaluated::Fractional {
                    objective,
                    branch_var,
                    branch_value,
                } => {
                    let worth_keeping = incumbent
                        .as_ref()
                        .map_or(true, |(inc, _)| objective < *inc - PRUNE_EPS);
                    if worth_keeping {
                        heap.push(Node {
                            bound: objective,
                            id: next_id,
                            lower,
                            upper,
                            branch_var,
                            branch_value,
                        });
                        next_id += 1;
                    }
                }
            }
        }
    }

    match incumbent {
        Some((obj, values)) => Ok(report(
            SolveStatus::Optimal,
            obj,
            obj,
            Some(&values),
            node_count,
            root_incumbent,
        )),
        None => Ok(report(
            SolveStatus::Infeasible,
            f64::INFINITY,
            f64::INFINITY,
            None,
            node_count,
            root_incumbent,
        )),
    }
}
