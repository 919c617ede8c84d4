//! `floodgrid`: solve substation-hardening models against flood scenarios
//! and reproduce the surrounding analyses (budget sweeps, bound chains,
//! optimal-budget search, shed histograms) as CSV files and SVG charts.
//!
//! Exit codes: 0 on success (optimal or gap reached), 1 on parse, validation
//! or IO failures, 2 on solver time limit, 3 on infeasible models.

mod chart;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use floodgrid::analysis::{
    approx_optimal_budget, budget_grid, disaster_cost, shed_histogram, Study, SweepPoint, Variant,
};
use floodgrid::formulations::{
    build_min_budget_zero_shed, build_ro, build_so, StudyParams,
};
use floodgrid::grid::{parse_grid, Grid, GridError};
use floodgrid::milp::{mps::export_mps, solve, SolveParams, SolveReport, SolveStatus};
use floodgrid::report::{
    bounds_csv, evaluation_csv, histogram_csv, optimal_budget_csv, plan_csv, read_plan_csv,
    sweep_csv, HistogramRow, OptimalBudgetRow,
};
use floodgrid::scenario::{parse_scenarios, ScenarioSet};

#[derive(Parser)]
#[command(
    name = "floodgrid",
    version,
    about = "Substation hardening optimization against flood scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    So,
    Ro,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::So => Variant::So,
            VariantArg::Ro => Variant::Ro,
        }
    }
}

#[derive(Args)]
struct CommonOpts {
    /// Grid document (JSON).
    #[arg(long)]
    grid: PathBuf,
    /// Flood scenario document (JSON).
    #[arg(long)]
    scenarios: PathBuf,
    /// Relative MIP gap; 0 solves to proven optimality.
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
    /// Solver time limit, seconds.
    #[arg(long = "time-limit", default_value_t = 21_600.0)]
    time_limit: f64,
    /// Concurrent per-scenario solves; defaults to the processor count.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for CSV and SVG files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Tie-breaking seed. Reserved: no operation is randomized today.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the stochastic (so) or robust (ro) model at a fixed budget.
    Solve {
        #[arg(value_enum)]
        variant: VariantArg,
        /// Hardening budget, dollars.
        #[arg(long)]
        budget: f64,
        /// Also write the model in MPS format.
        #[arg(long = "export-mps")]
        export_mps: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Minimum hardening expenditure for zero shed in all scenarios.
    MinBudget {
        #[arg(long = "export-mps")]
        export_mps: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Budget sweep with warm starts: sweep, bounds, and histogram CSVs plus charts.
    Sweep {
        /// Comma-separated budgets; defaults to a grid up to the zero-shed budget.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<f64>>,
        /// Histogram bin width in MW; defaults to a tenth of the worst shed.
        #[arg(long = "bin-width")]
        bin_width: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Exact and grid-approximate optimal hardening budgets per omega.
    OptimalBudget {
        /// Comma-separated omega values, dollars per MWh.
        #[arg(long, value_delimiter = ',')]
        omega: Option<Vec<f64>>,
        /// Expected hurricane counts; combined with --hours and --voll.
        #[arg(long, value_delimiter = ',')]
        gamma: Option<Vec<f64>>,
        /// Restoration times, hours.
        #[arg(long, value_delimiter = ',')]
        hours: Option<Vec<f64>>,
        /// Values of lost load, dollars per MWh.
        #[arg(long, value_delimiter = ',')]
        voll: Option<Vec<f64>>,
        /// Sweep budgets for the approximation; defaults as in `sweep`.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate a hardening plan (plan.csv) across all scenarios.
    Evaluate {
        /// Plan file to evaluate.
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Parse and structurally validate inputs.
    Validate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Solve { variant, budget, export_mps, common } => {
            cmd_solve(variant.into(), budget, export_mps, &common)
        }
        Command::MinBudget { export_mps, common } => cmd_min_budget(export_mps, &common),
        Command::Sweep { budgets, bin_width, common } => cmd_sweep(budgets, bin_width, &common),
        Command::OptimalBudget { omega, gamma, hours, voll, budgets, common } => {
            cmd_optimal_budget(omega, gamma, hours, voll, budgets, &common)
        }
        Command::Evaluate { plan, common } => cmd_evaluate(&plan, &common),
        Command::Validate { grid, scenarios } => cmd_validate(&grid, scenarios.as_deref()),
    }
}

fn load_inputs(common: &CommonOpts) -> Result<(Grid, ScenarioSet)> {
    let grid_bytes = std::fs::read(&common.grid)
        .with_context(|| format!("reading grid file {}", common.grid.display()))?;
    let grid = parse_grid(&grid_bytes)
        .with_context(|| format!("parsing grid file {}", common.grid.display()))?;
    let scen_bytes = std::fs::read(&common.scenarios)
        .with_context(|| format!("reading scenario file {}", common.scenarios.display()))?;
    let scenarios = parse_scenarios(&scen_bytes, &grid)
        .with_context(|| format!("parsing scenario file {}", common.scenarios.display()))?;
    Ok((grid, scenarios))
}

fn study<'a>(grid: &'a Grid, scenarios: &'a ScenarioSet, common: &CommonOpts) -> Result<Study<'a>> {
    if common.gap < 0.0 {
        bail!("--gap must be non-negative");
    }
    if common.time_limit <= 0.0 {
        bail!("--time-limit must be positive");
    }
    let mut study = Study::new(grid, scenarios);
    study.solve_params = SolveParams {
        relative_gap: common.gap,
        time_limit: common.time_limit,
        warm_start: None,
    };
    if let Some(jobs) = common.jobs {
        study.jobs = jobs.max(1);
    }
    Ok(study)
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn clean(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn report_line(report: &SolveReport, objective_scale: f64, unit: &str) {
    println!(
        "status={} objective{unit}={} bound{unit}={} gap={} time={:.3}s nodes={}",
        report.status,
        clean(report.objective_value * objective_scale),
        clean(report.best_bound * objective_scale),
        clean(report.gap),
        report.wall_time,
        report.node_count
    );
}

fn status_exit(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Optimal | SolveStatus::GapReached => ExitCode::SUCCESS,
        SolveStatus::TimeLimit => ExitCode::from(2),
        SolveStatus::Infeasible | SolveStatus::Unbounded => ExitCode::from(3),
    }
}

fn cmd_solve(
    variant: Variant,
    budget: f64,
    export_mps_flag: bool,
    common: &CommonOpts,
) -> Result<ExitCode> {
    if !(budget >= 0.0) {
        bail!("--budget must be non-negative");
    }
    let (grid, scenarios) = load_inputs(common)?;
    let study = study(&grid, &scenarios, common)?;
    let stage = match variant {
        Variant::So => build_so(&grid, &scenarios, budget, &study.options),
        Variant::Ro => build_ro(&grid, &scenarios, budget, &study.options),
    };
    if export_mps_flag {
        write_out(&common.out, "model.mps", &export_mps(&stage.model))?;
    }
    let report = solve(&stage.model, &study.solve_params)?;
    report_line(&report, grid.base_mva, "_mw");
    if !report.assignment.is_empty() {
        let plan = stage.extract_plan(&grid, &report.assignment);
        write_out(&common.out, "plan.csv", &plan_csv(&grid, &plan))?;
    }
    Ok(status_exit(report.status))
}

fn cmd_min_budget(export_mps_flag: bool, common: &CommonOpts) -> Result<ExitCode> {
    let (grid, scenarios) = load_inputs(common)?;
    let study = study(&grid, &scenarios, common)?;
    if export_mps_flag {
        let stage = build_min_budget_zero_shed(&grid, &scenarios, &study.options);
        write_out(&common.out, "model.mps", &export_mps(&stage.model))?;
    }
    let outcome = study.min_zero_shed_budget()?;
    report_line(&outcome.report, 1.0, "_dollars");
    if outcome.report.is_solved() {
        println!("min_budget={}", outcome.budget.round() as i64);
        write_out(&common.out, "plan.csv", &plan_csv(&grid, &outcome.plan))?;
    } else {
        eprintln!("no hardening plan achieves zero shed in every scenario");
    }
    Ok(status_exit(outcome.report.status))
}

fn resolve_budgets(
    study: &Study<'_>,
    budgets: &Option<Vec<f64>>,
) -> Result<Vec<f64>> {
    match budgets {
        Some(list) => Ok(list.clone()),
        None => {
            let outcome = study.min_zero_shed_budget()?;
            if !outcome.report.is_solved() {
                bail!("cannot derive a default budget grid: the zero-shed model is infeasible; pass --budgets");
            }
            Ok(budget_grid(outcome.budget))
        }
    }
}

fn cmd_sweep(
    budgets: Option<Vec<f64>>,
    bin_width: Option<f64>,
    common: &CommonOpts,
) -> Result<ExitCode> {
    let (grid, scenarios) = load_inputs(common)?;
    let study = study(&grid, &scenarios, common)?;
    let budgets = resolve_budgets(&study, &budgets)?;

    let so_sweep = study.budget_sweep(&budgets, Variant::So)?;
    let ro_sweep = study.budget_sweep(&budgets, Variant::Ro)?;
    write_out(&common.out, "sweep.csv", &sweep_csv(&so_sweep))?;

    let mut bounds = Vec::new();
    for &budget in &budgets {
        match study.compute_bounds(budget) {
            Ok(b) => bounds.push(b),
            Err(e) => log::warn!("bounds at budget {budget} skipped: {e}"),
        }
    }
    write_out(&common.out, "bounds.csv", &bounds_csv(&bounds))?;

    let worst = so_sweep
        .iter()
        .chain(&ro_sweep)
        .map(|p| p.max_shed)
        .fold(0.0, f64::max);
    let width = bin_width.unwrap_or_else(|| if worst > 0.0 { worst / 10.0 } else { 1.0 });
    if !(width > 0.0) {
        bail!("--bin-width must be positive");
    }
    let mut hist_rows = Vec::new();
    let mut panels = Vec::new();
    for (so_point, ro_point) in so_sweep.iter().zip(&ro_sweep) {
        let sheds = |p: &SweepPoint| p.per_scenario_shed.values().copied().collect::<Vec<f64>>();
        let so_bins = shed_histogram(&sheds(so_point), width)?;
        let ro_bins = shed_histogram(&sheds(ro_point), width)?;
        for (variant, bins) in [(Variant::So, &so_bins), (Variant::Ro, &ro_bins)] {
            for bin in bins {
                hist_rows.push(HistogramRow {
                    budget: so_point.budget,
                    variant,
                    bin: bin.clone(),
                });
            }
        }
        let n = so_bins.len().max(ro_bins.len());
        let labels: Vec<String> = (0..n).map(|m| format!("{:.0}", m as f64 * width)).collect();
        let pad = |bins: &[floodgrid::analysis::HistogramBin]| {
            let mut counts: Vec<usize> = bins.iter().map(|b| b.count).collect();
            counts.resize(n, 0);
            counts
        };
        panels.push(chart::HistogramPanel {
            title: format!("budget {}", axis_money(so_point.budget)),
            bins: labels,
            series: vec![("so".into(), pad(&so_bins)), ("ro".into(), pad(&ro_bins))],
        });
    }
    write_out(&common.out, "histogram.csv", &histogram_csv(&hist_rows))?;

    let curve = |f: &dyn Fn(&floodgrid::analysis::BoundsRecord) -> f64| -> Vec<(f64, f64)> {
        bounds.iter().map(|b| (b.budget, f(b))).collect()
    };
    let bounds_chart = chart::line_chart(
        "Load shed bounds vs hardening budget",
        "budget ($)",
        "shed (MW)",
        &[
            chart::Series { name: "ws".into(), points: curve(&|b| b.ws) },
            chart::Series { name: "so".into(), points: curve(&|b| b.so) },
            chart::Series { name: "ev_eval".into(), points: curve(&|b| b.ev_eval) },
            chart::Series { name: "ro_eval".into(), points: curve(&|b| b.ro_eval) },
            chart::Series { name: "ro_opt".into(), points: curve(&|b| b.ro_opt) },
        ],
    );
    write_out(&common.out, "bounds.svg", &bounds_chart)?;
    write_out(
        &common.out,
        "histograms.svg",
        &chart::histogram_grid("Shed distribution by budget (MW)", &panels),
    )?;

    let solved = so_sweep.iter().filter(|p| p.report.is_solved()).count();
    for p in &so_sweep {
        println!(
            "budget={} expected_shed_mw={} max_shed_mw={} status={}",
            axis_money(p.budget),
            clean(p.expected_shed),
            clean(p.max_shed),
            p.report.status
        );
    }
    Ok(if solved > 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn axis_money(v: f64) -> String {
    format!("{}", v.round() as i64)
}

fn cmd_optimal_budget(
    omega: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
    hours: Option<Vec<f64>>,
    voll: Option<Vec<f64>>,
    budgets: Option<Vec<f64>>,
    common: &CommonOpts,
) -> Result<ExitCode> {
    let mut economics: Vec<StudyParams> = Vec::new();
    if let Some(omegas) = omega {
        for w in omegas {
            economics.push(StudyParams::from_omega(w, 0.0)?);
        }
    }
    if let (Some(gs), Some(hs), Some(vs)) = (&gamma, &hours, &voll) {
        for &g in gs {
            for &h in hs {
                for &v in vs {
                    economics.push(StudyParams::new(g, h, v, 0.0)?);
                }
            }
        }
    } else if gamma.is_some() || hours.is_some() || voll.is_some() {
        bail!("--gamma, --hours, and --voll must be given together");
    }
    if economics.is_empty() {
        bail!("provide --omega values or a --gamma/--hours/--voll combination");
    }

    let (grid, scenarios) = load_inputs(common)?;
    let study = study(&grid, &scenarios, common)?;
    let budgets = resolve_budgets(&study, &budgets)?;
    let sweep = study.budget_sweep(&budgets, Variant::So)?;

    let mut rows = Vec::new();
    let mut series = Vec::new();
    println!("omega exact_expenditure approx_budget");
    for params in &economics {
        let (plan, report) = study.optimal_budget_exact(params, Variant::So)?;
        let (approx_budget, approx_total) = approx_optimal_budget(&sweep, params);
        rows.push(OptimalBudgetRow {
            omega: params.omega,
            exact_expenditure: plan.cost(),
            exact_total_cost: report.objective_value,
            approx_budget,
            approx_total_cost: approx_total,
        });
        println!(
            "{} {} {}",
            params.omega,
            axis_money(plan.cost()),
            axis_money(approx_budget)
        );
        series.push(chart::Series {
            name: format!("omega {}", params.omega),
            points: sweep
                .iter()
                .map(|p| (p.budget, disaster_cost(p.expected_shed, params) + p.budget))
                .collect(),
        });
    }
    write_out(&common.out, "optimal_budget.csv", &optimal_budget_csv(&rows))?;
    write_out(
        &common.out,
        "optimal_budget.svg",
        &chart::line_chart(
            "Total disaster management cost vs budget",
            "budget ($)",
            "disaster cost + budget ($)",
            &series,
        ),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(plan_path: &Path, common: &CommonOpts) -> Result<ExitCode> {
    let (grid, scenarios) = load_inputs(common)?;
    let study = study(&grid, &scenarios, common)?;
    let plan_bytes = std::fs::read(plan_path)
        .with_context(|| format!("reading plan file {}", plan_path.display()))?;
    let plan = read_plan_csv(&grid, &plan_bytes)
        .with_context(|| format!("parsing plan file {}", plan_path.display()))?;
    plan.validate(&grid, &scenarios)?;
    let eval = study.evaluate_plan(&plan)?;
    write_out(&common.out, "evaluation.csv", &evaluation_csv(&scenarios, &eval))?;
    println!(
        "plan_cost={} expected_shed_mw={} max_shed_mw={}",
        axis_money(plan.cost()),
        clean(eval.expected_mw),
        clean(eval.max_mw)
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(grid_path: &Path, scenarios_path: Option<&Path>) -> Result<ExitCode> {
    let grid_bytes = std::fs::read(grid_path)
        .with_context(|| format!("reading grid file {}", grid_path.display()))?;
    let grid = match parse_grid(&grid_bytes) {
        Ok(grid) => grid,
        Err(GridError::Invalid(violations)) => {
            for v in &violations {
                eprintln!("grid: {v}");
            }
            eprintln!("{} violation(s) in {}", violations.len(), grid_path.display());
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e).context("parsing grid file"),
    };
    println!(
        "grid ok: {} substations, {} buses, {} branches",
        grid.substations.len(),
        grid.buses.len(),
        grid.branches.len()
    );
    if let Some(path) = scenarios_path {
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading scenario file {}", path.display()))?;
        let set = parse_scenarios(&bytes, &grid)
            .with_context(|| format!("parsing scenario file {}", path.display()))?;
        println!(
            "scenarios ok: {} scenarios, {} substations flooded somewhere",
            set.len(),
            set.flooded_substations().len()
        );
    }
    Ok(ExitCode::SUCCESS)
}
