//! The experiment drivers: plan evaluation, warm-started budget sweeps,
//! bound computation (wait-and-see, stochastic, mean-value, robust),
//! disaster-cost scaling, optimal-budget approximation over a budget grid,
//! and load-shed histograms.
//!
//! Per-scenario solves are independent and run on a small worker pool; sweep
//! points run sequentially because each one warm starts the next.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::formulations::{
    build_ev, build_min_budget_zero_shed, build_recourse, build_ro, build_so, build_tdm,
    build_ws, BuildOptions, FormulationError, HardeningPlan, StageModel, StudyParams,
};
use crate::grid::Grid;
use crate::milp::{solve, SolveError, SolveParams, SolveReport, SolveStatus};
use crate::scenario::{ScenarioId, ScenarioSet};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("model {model} finished with status {status}")]
    UnexpectedStatus { model: String, status: SolveStatus },
    #[error("budgets must be non-negative and strictly ascending")]
    BadBudgets,
    #[error("bin width must be positive")]
    BadBinWidth,
}

/// Which risk measure a sweep optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    So,
    Ro,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::So => "so",
            Variant::Ro => "ro",
        })
    }
}

/// How a plan performs across scenarios, in megawatts.
#[derive(Debug, Clone)]
pub struct PlanEvaluation {
    pub per_scenario: BTreeMap<ScenarioId, f64>,
    pub expected_mw: f64,
    pub max_mw: f64,
}

/// One point of a budget sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub budget: f64,
    pub plan: HardeningPlan,
    /// Expected shed of the point's plan, MW.
    pub expected_shed: f64,
    /// Worst-case shed of the point's plan, MW.
    pub max_shed: f64,
    pub per_scenario_shed: BTreeMap<ScenarioId, f64>,
    pub report: SolveReport,
}

/// The bound chain at one budget, all in MW.
#[derive(Debug, Clone)]
pub struct BoundsRecord {
    pub budget: f64,
    /// Wait-and-see bound (scenario-specific first stages).
    pub ws: f64,
    /// Stochastic optimum.
    pub so: f64,
    /// Expected shed of the mean-value plan.
    pub ev_eval: f64,
    /// Expected shed of the robust plan.
    pub ro_eval: f64,
    /// Robust optimum (worst-case shed of the robust plan).
    pub ro_opt: f64,
    pub vss: f64,
    pub evpi: f64,
}

/// Outcome of the minimum zero-shed budget solve.
#[derive(Debug, Clone)]
pub struct MinBudgetOutcome {
    pub budget: f64,
    pub plan: HardeningPlan,
    pub report: SolveReport,
}

/// Shared context for the analysis operations.
pub struct Study<'a> {
    pub grid: &'a Grid,
    pub scenarios: &'a ScenarioSet,
    pub solve_params: SolveParams,
    pub jobs: usize,
    pub options: BuildOptions,
}

impl<'a> Study<'a> {
    pub fn new(grid: &'a Grid, scenarios: &'a ScenarioSet) -> Self {
        let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        Study {
            grid,
            scenarios,
            solve_params: SolveParams::exact(),
            jobs,
            options: BuildOptions::default(),
        }
    }

    fn params(&self) -> SolveParams {
        SolveParams {
            warm_start: None,
            ..self.solve_params.clone()
        }
    }

    fn solved(&self, stage: &StageModel, params: &SolveParams) -> Result<SolveReport, AnalysisError> {
        let report = solve(&stage.model, params)?;
        if !report.is_solved() {
            return Err(AnalysisError::UnexpectedStatus {
                model: stage.model.name.clone(),
                status: report.status,
            });
        }
        Ok(report)
    }

    /// Solves the recourse problem once per scenario and aggregates, in MW.
    pub fn evaluate_plan(&self, plan: &HardeningPlan) -> Result<PlanEvaluation, AnalysisError> {
        let base = self.grid.base_mva;
        let sheds: Vec<(ScenarioId, f64)> = run_jobs(self.jobs, self.scenarios.len(), |i| {
            let scenario = &self.scenarios.scenarios()[i];
            let stage = build_recourse(self.grid, self.scenarios, plan, scenario, &self.options)?;
            let report = self.solved(&stage, &self.params())?;
            Ok::<_, AnalysisError>((scenario.id.clone(), report.objective_value * base))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

        let expected_mw = self
            .scenarios
            .scenarios()
            .iter()
            .zip(&sheds)
            .map(|(s, (_, mw))| s.probability * mw)
            .sum();
        let max_mw = sheds.iter().map(|(_, mw)| *mw).fold(0.0, f64::max);
        Ok(PlanEvaluation {
            per_scenario: sheds.into_iter().collect(),
            expected_mw,
            max_mw,
        })
    }

    /// Sweeps ascending budgets, warm starting each solve from the previous
    /// optimum (the first from the full-shed shutdown seed). Non-optimal
    /// statuses are recorded on their point and the sweep continues.
    pub fn budget_sweep(
        &self,
        budgets: &[f64],
        variant: Variant,
    ) -> Result<Vec<SweepPoint>, AnalysisError> {
        if budgets.is_empty()
            || budgets.iter().any(|b| !b.is_finite() || *b < 0.0)
            || budgets.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(AnalysisError::BadBudgets);
        }
        let mut points = Vec::with_capacity(budgets.len());
        let mut warm: Option<BTreeMap<String, f64>> = None;
        for &budget in budgets {
            let stage = match variant {
                Variant::So => build_so(self.grid, self.scenarios, budget, &self.options),
                Variant::Ro => build_ro(self.grid, self.scenarios, budget, &self.options),
            };
            let mut params = self.params();
            params.warm_start = Some(match warm.take() {
                Some(previous) => previous,
                None => stage.shutdown_assignment(self.grid, &HardeningPlan::zero()),
            });
            let report = solve(&stage.model, &params)?;
            let plan = if report.assignment.is_empty() {
                HardeningPlan::zero()
            } else {
                stage.extract_plan(self.grid, &report.assignment)
            };
            let evaluation = self.evaluate_plan(&plan)?;
            if !report.assignment.is_empty() {
                warm = Some(report.assignment.clone());
            }
            points.push(SweepPoint {
                budget,
                plan,
                expected_shed: evaluation.expected_mw,
                max_shed: evaluation.max_mw,
                per_scenario_shed: evaluation.per_scenario,
                report,
            });
        }
        Ok(points)
    }

    /// The full bound chain at one budget: wait-and-see, stochastic optimum,
    /// the mean-value plan's evaluation, and the robust plan's evaluation.
    pub fn compute_bounds(&self, budget: f64) -> Result<BoundsRecord, AnalysisError> {
        let base = self.grid.base_mva;

        let ws_values: Vec<f64> = run_jobs(self.jobs, self.scenarios.len(), |i| {
            let scenario = &self.scenarios.scenarios()[i];
            let stage = build_ws(self.grid, self.scenarios, &scenario.id, budget, &self.options)?;
            let report = self.solved(&stage, &self.params())?;
            Ok::<_, AnalysisError>(report.objective_value)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
        let ws = self
            .scenarios
            .scenarios()
            .iter()
            .zip(&ws_values)
            .map(|(s, v)| s.probability * v * base)
            .sum();

        let so_stage = build_so(self.grid, self.scenarios, budget, &self.options);
        let so_report = self.solved(&so_stage, &self.params())?;
        let so = so_report.objective_value * base;

        let (ev_stage, _mean_set) = build_ev(self.grid, self.scenarios, budget, &self.options)?;
        let ev_report = self.solved(&ev_stage, &self.params())?;
        let ev_plan = ev_stage.extract_plan(self.grid, &ev_report.assignment);
        let ev_eval = self.evaluate_plan(&ev_plan)?.expected_mw;

        let ro_stage = build_ro(self.grid, self.scenarios, budget, &self.options);
        let ro_report = self.solved(&ro_stage, &self.params())?;
        let ro_plan = ro_stage.extract_plan(self.grid, &ro_report.assignment);
        let ro_opt = ro_report.objective_value * base;
        let ro_eval = self.evaluate_plan(&ro_plan)?.expected_mw;

        Ok(BoundsRecord {
            budget,
            ws,
            so,
            ev_eval,
            ro_eval,
            ro_opt,
            vss: ev_eval - so,
            evpi: so - ws,
        })
    }

    /// Minimum hardening expenditure for zero shed in every scenario.
    /// The returned report carries `Infeasible` when even full hardening
    /// cannot serve all load.
    pub fn min_zero_shed_budget(&self) -> Result<MinBudgetOutcome, AnalysisError> {
        let stage = build_min_budget_zero_shed(self.grid, self.scenarios, &self.options);
        let report = solve(&stage.model, &self.params())?;
        let (budget, plan) = if report.is_solved() {
            (
                report.objective_value,
                stage.extract_plan(self.grid, &report.assignment),
            )
        } else {
            (f64::INFINITY, HardeningPlan::zero())
        };
        Ok(MinBudgetOutcome { budget, plan, report })
    }

    /// Solves the total-disaster-cost model for the given economics; the
    /// optimal plan's cost is the optimal investment budget.
    pub fn optimal_budget_exact(
        &self,
        params: &StudyParams,
        variant: Variant,
    ) -> Result<(HardeningPlan, SolveReport), AnalysisError> {
        let stage = build_tdm(
            self.grid,
            self.scenarios,
            params,
            variant == Variant::Ro,
            &self.options,
        );
        let report = self.solved(&stage, &self.params())?;
        let plan = stage.extract_plan(self.grid, &report.assignment);
        Ok((plan, report))
    }

    /// The default sweep grid: zero up to the first multiple of a round step
    /// at or above the zero-shed budget, with the step sized so the grid has
    /// about eight intervals.
    pub fn default_budget_grid(&self) -> Result<Vec<f64>, AnalysisError> {
        let outcome = self.min_zero_shed_budget()?;
        if !outcome.report.is_solved() {
            return Err(AnalysisError::UnexpectedStatus {
                model: "min_budget".into(),
                status: outcome.report.status,
            });
        }
        Ok(budget_grid(outcome.budget))
    }
}

/// Budget grid for a given zero-shed budget: `0, step, 2*step, ...` stopping
/// at the first point at or above it.
pub fn budget_grid(zero_shed_budget: f64) -> Vec<f64> {
    if !(zero_shed_budget > 0.0) {
        return vec![0.0];
    }
    let step = round_step((zero_shed_budget / 8.0).ceil());
    let mut budgets = vec![0.0];
    while *budgets.last().unwrap() < zero_shed_budget {
        budgets.push(budgets.last().unwrap() + step);
    }
    budgets
}

/// Smallest round number (1, 2, or 5 times a power of ten) at or above `v`.
fn round_step(v: f64) -> f64 {
    let v = v.max(1.0);
    let mag = 10f64.powf(v.log10().floor());
    for multiplier in [1.0, 2.0, 5.0, 10.0] {
        if mag * multiplier >= v - 1e-9 {
            return mag * multiplier;
        }
    }
    unreachable!()
}

/// Disaster-management cost of a shed level over the planning horizon:
/// `gamma * h * delta * shed`, with shed in MW.
pub fn disaster_cost(shed_mw: f64, params: &StudyParams) -> f64 {
    params.omega * shed_mw
}

/// Picks the sweep point minimizing disaster cost plus budget; ties go to
/// the smaller budget. Returns `(budget, total cost)`.
pub fn approx_optimal_budget(sweep: &[SweepPoint], params: &StudyParams) -> (f64, f64) {
    assert!(!sweep.is_empty(), "sweep must be non-empty");
    let mut best = (sweep[0].budget, f64::INFINITY);
    for point in sweep {
        let total = disaster_cost(point.expected_shed, params) + point.budget;
        if total < best.1 - 1e-12 {
            best = (point.budget, total);
        }
    }
    best
}

/// One histogram bin over `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Bins shed values into `[m*w, (m+1)*w)` intervals from zero to the largest
/// occupied bin, empty bins included. The counts sum to the number of values.
pub fn shed_histogram(sheds: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>, AnalysisError> {
    if !(bin_width > 0.0) {
        return Err(AnalysisError::BadBinWidth);
    }
    let index = |shed: f64| ((shed / bin_width) + 1e-9).floor().max(0.0) as usize;
    let top = sheds.iter().copied().map(index).max().unwrap_or(0);
    let mut bins: Vec<HistogramBin> = (0..=top)
        .map(|m| HistogramBin {
            lo: m as f64 * bin_width,
            hi: (m + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for &shed in sheds {
        bins[index(shed)].count += 1;
    }
    Ok(bins)
}

/// Runs `count` independent tasks on up to `jobs` threads, returning results
/// in task order. Results are identical to sequential execution because each
/// task is a pure function of its index.
fn run_jobs<T, F>(jobs: usize, count: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.max(1).min(count.max(1));
    if jobs <= 1 || count <= 1 {
        return (0..count).map(task).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let result = task(i);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("task completed"))
        .collect()
}
