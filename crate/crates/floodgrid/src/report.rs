//! CSV writers and readers for the analysis outputs.
//!
//! Money is rounded to whole dollars in these reports; sheds, gaps, and
//! times keep full precision. Every file written here is parseable by the
//! readers in this module, and repeated writes of the same data are
//! byte-identical.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analysis::{BoundsRecord, HistogramBin, PlanEvaluation, SweepPoint, Variant};
use crate::formulations::HardeningPlan;
use crate::grid::{Grid, SubstationId};
use crate::scenario::ScenarioSet;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
}

fn money(v: f64) -> String {
    format!("{}", v.round() as i64)
}

fn float(v: f64) -> String {
    // Shave sub-nanoscale float noise so reports stay readable; values are
    // still deterministic for identical inputs.
    let cleaned = (v * 1e9).round() / 1e9 + 0.0; // normalizes -0
    format!("{cleaned}")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// `plan.csv`: one row per substation.
pub fn plan_csv(grid: &Grid, plan: &HardeningPlan) -> String {
    let mut w = writer();
    w.write_record(["substation", "chosen", "height_ft", "cost"]).unwrap();
    for sub in &grid.substations {
        let chosen = plan.chosen(&sub.id);
        let height = plan.height(&sub.id);
        let cost = if chosen { sub.fixed_cost } else { 0.0 } + sub.variable_cost * f64::from(height);
        w.write_record([
            sub.id.as_str(),
            if chosen { "true" } else { "false" },
            &height.to_string(),
            &money(cost),
        ])
        .unwrap();
    }
    finish(w)
}

/// Reads a `plan.csv` back into a plan; the cost column is recomputed from
/// the grid rather than trusted.
pub fn read_plan_csv(grid: &Grid, bytes: &[u8]) -> Result<HardeningPlan, ReportError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut chosen = BTreeMap::new();
    let mut height = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |message: String| ReportError::BadRow { row: i + 2, message };
        if record.len() < 3 {
            return Err(bad("expected at least 3 fields".into()));
        }
        let id = SubstationId::from(&record[0]);
        let is_chosen: bool = record[1]
            .parse()
            .map_err(|_| bad(format!("bad chosen flag {:?}", &record[1])))?;
        let h: u32 = record[2]
            .parse()
            .map_err(|_| bad(format!("bad height {:?}", &record[2])))?;
        if is_chosen {
            chosen.insert(id.clone(), true);
        }
        if h > 0 {
            height.insert(id, h);
        }
    }
    Ok(HardeningPlan::from_parts(grid, chosen, height))
}

/// `sweep.csv`: one row per budget point.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut w = writer();
    w.write_record(["budget", "expected_shed", "max_shed", "plan cost", "gap", "wall_time", "status"])
        .unwrap();
    for p in points {
        w.write_record([
            money(p.budget),
            float(p.expected_shed),
            float(p.max_shed),
            money(p.plan.cost()),
            float(p.report.gap),
            float(p.report.wall_time),
            p.report.status.to_string(),
        ])
        .unwrap();
    }
    finish(w)
}

/// `bounds.csv`: the bound chain per budget.
pub fn bounds_csv(records: &[BoundsRecord]) -> String {
    let mut w = writer();
    w.write_record(["budget", "ws", "so", "ev_eval", "ro_eval", "ro_opt", "vss", "evpi"])
        .unwrap();
    for r in records {
        w.write_record([
            money(r.budget),
            float(r.ws),
            float(r.so),
            float(r.ev_eval),
            float(r.ro_eval),
            float(r.ro_opt),
            float(r.vss),
            float(r.evpi),
        ])
        .unwrap();
    }
    finish(w)
}

/// One histogram row: a bin of one variant's shed distribution at a budget.
#[derive(Debug, Clone)]
pub struct HistogramRow {
    pub budget: f64,
    pub variant: Variant,
    pub bin: HistogramBin,
}

/// `histogram.csv`: per-budget, per-variant shed distributions.
pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut w = writer();
    w.write_record(["budget", "variant", "bin_lo", "bin_hi", "count"]).unwrap();
    for r in rows {
        w.write_record([
            money(r.budget),
            r.variant.to_string(),
            float(r.bin.lo),
            float(r.bin.hi),
            r.bin.count.to_string(),
        ])
        .unwrap();
    }
    finish(w)
}

/// `evaluation.csv`: per-scenario sheds of one plan.
pub fn evaluation_csv(scenarios: &ScenarioSet, eval: &PlanEvaluation) -> String {
    let mut w = writer();
    w.write_record(["scenario", "probability", "shed_mw"]).unwrap();
    for s in scenarios.scenarios() {
        let shed = eval.per_scenario.get(&s.id).copied().unwrap_or(0.0);
        w.write_record([s.id.0.as_str(), &float(s.probability), &float(shed)])
            .unwrap();
    }
    finish(w)
}

/// One row of the optimal-budget table.
#[derive(Debug, Clone)]
pub struct OptimalBudgetRow {
    pub omega: f64,
    pub exact_expenditure: f64,
    pub exact_total_cost: f64,
    pub approx_budget: f64,
    pub approx_total_cost: f64,
}

/// `optimal_budget.csv`: exact versus grid-approximate budgets per omega.
pub fn optimal_budget_csv(rows: &[OptimalBudgetRow]) -> String {
    let mut w = writer();
    w.write_record([
        "omega",
        "exact_expenditure",
        "exact_total_cost",
        "approx_budget",
        "approx_total_cost",
    ])
    .unwrap();
    for r in rows {
        w.write_record([
            float(r.omega),
            money(r.exact_expenditure),
            money(r.exact_total_cost),
            money(r.approx_budget),
            money(r.approx_total_cost),
        ])
        .unwrap();
    }
    finish(w)
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    index: usize,
    row: usize,
) -> Result<T, ReportError> {
    record
        .get(index)
        .ok_or_else(|| ReportError::BadRow {
            row,
            message: format!("missing field {index}"),
        })?
        .parse()
        .map_err(|_| ReportError::BadRow {
            row,
            message: format!("bad value {:?} in field {index}", &record[index]),
        })
}

/// A parsed `sweep.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub budget: f64,
    pub expected_shed: f64,
    pub max_shed: f64,
    pub plan_cost: f64,
    pub gap: f64,
    pub wall_time: f64,
    pub status: String,
}

pub fn read_sweep_csv(bytes: &[u8]) -> Result<Vec<SweepRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        out.push(SweepRow {
            budget: parse_field(&record, 0, row)?,
            expected_shed: parse_field(&record, 1, row)?,
            max_shed: parse_field(&record, 2, row)?,
            plan_cost: parse_field(&record, 3, row)?,
            gap: parse_field(&record, 4, row)?,
            wall_time: parse_field(&record, 5, row)?,
            status: record.get(6).unwrap_or_default().to_string(),
        });
    }
    Ok(out)
}

pub fn read_bounds_csv(bytes: &[u8]) -> Result<Vec<BoundsRecord>, ReportError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        out.push(BoundsRecord {
            budget: parse_field(&record, 0, row)?,
            ws: parse_field(&record, 1, row)?,
            so: parse_field(&record, 2, row)?,
            ev_eval: parse_field(&record, 3, row)?,
            ro_eval: parse_field(&record, 4, row)?,
            ro_opt: parse_field(&record, 5, row)?,
            vss: parse_field(&record, 6, row)?,
            evpi: parse_field(&record, 7, row)?,
        });
    }
    Ok(out)
}

pub fn read_histogram_csv(bytes: &[u8]) -> Result<Vec<HistogramRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let variant = match record.get(1) {
            Some("so") => Variant::So,
            Some("ro") => Variant::Ro,
            other => {
                return Err(ReportError::BadRow {
                    row,
                    message: format!("unknown variant {other:?}"),
                })
            }
        };
        out.push(HistogramRow {
            budget: parse_field(&record, 0, row)?,
            variant,
            bin: HistogramBin {
                lo: parse_field(&record, 2, row)?,
                hi: parse_field(&record, 3, row)?,
                count: parse_field(&record, 4, row)?,
            },
        });
    }
    Ok(out)
}

/// A parsed `evaluation.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRow {
    pub scenario: String,
    pub probability: f64,
    pub shed_mw: f64,
}

pub fn read_evaluation_csv(bytes: &[u8]) -> Result<Vec<EvaluationRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        out.push(EvaluationRow {
            scenario: record.get(0).unwrap_or_default().to_string(),
            probability: parse_field(&record, 1, row)?,
            shed_mw: parse_field(&record, 2, row)?,
        });
    }
    Ok(out)
}

pub fn read_optimal_budget_csv(bytes: &[u8]) -> Result<Vec<OptimalBudgetRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        out.push(OptimalBudgetRow {
            omega: parse_field(&record, 0, row)?,
            exact_expenditure: parse_field(&record, 1, row)?,
            exact_total_cost: parse_field(&record, 2, row)?,
            approx_budget: parse_field(&record, 3, row)?,
            approx_total_cost: parse_field(&record, 4, row)?,
        });
    }
    Ok(out)
}
