//! Generic mixed-integer linear programming: model representation, an exact
//! branch-and-bound solver over a bounded-variable simplex relaxation, and
//! fixed-format MPS export/import.
//!
//! Models are always minimization problems. The solver is deterministic:
//! identical models and parameters produce identical reports (up to wall
//! time), which the analysis layer relies on for reproducible runs.

mod branch_bound;
mod simplex;

pub mod mps;

use std::collections::BTreeMap;
use std::collections::HashMap;

use thiserror::Error;

/// Feasibility tolerance applied per constraint when checking assignments.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Integrality tolerance for integer and binary variables.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Opaque handle to a variable inside a [`MilpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        matches!(self, VarKind::Binary | VarKind::Integer)
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A mixed-integer linear program in minimization form.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    objective_constant: f64,
    name_index: HashMap<String, VarId>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Adds a variable and returns its handle. Panics on a duplicate name:
    /// assignments are keyed by name, so names must be unique.
    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let name = name.into();
        let id = VarId(self.variables.len());
        if self.name_index.insert(name.clone(), id).is_some() {
            panic!("duplicate variable name: {name}");
        }
        self.variables.push(Variable { name, kind, lower, upper });
        id
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>, constant: f64) {
        self.objective = terms;
        self.objective_constant = constant;
    }

    pub fn add_objective_term(&mut self, var: VarId, coeff: f64) {
        self.objective.push((var, coeff));
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.name_index.get(name).copied()
    }

    /// Dense objective vector over variable indices, excluding the constant.
    pub(crate) fn dense_objective(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(v, coeff) in &self.objective {
            c[v.0] += coeff;
        }
        c
    }

    /// Checks the structural invariants: coefficient finiteness, bound
    /// ordering, and binary bounds within [0, 1].
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(ModelError::NanBound { var: v.name.clone() });
            }
            if v.lower > v.upper {
                return Err(ModelError::EmptyBoundInterval {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BinaryBounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            debug_assert_eq!(self.name_index.get(&v.name), Some(&VarId(i)));
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFiniteCoefficient {
                    constraint: c.name.clone(),
                });
            }
            for &(v, coeff) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(ModelError::UnknownVariable {
                        constraint: c.name.clone(),
                    });
                }
                if !coeff.is_finite() {
                    return Err(ModelError::NonFiniteCoefficient {
                        constraint: c.name.clone(),
                    });
                }
            }
        }
        for &(v, coeff) in &self.objective {
            if v.0 >= self.variables.len() || !coeff.is_finite() {
                return Err(ModelError::NonFiniteCoefficient {
                    constraint: "objective".into(),
                });
            }
        }
        if !self.objective_constant.is_finite() {
            return Err(ModelError::NonFiniteCoefficient {
                constraint: "objective".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("variable {var} has NaN bound")]
    NanBound { var: String },
    #[error("variable {var} has empty bound interval [{lower}, {upper}]")]
    EmptyBoundInterval { var: String, lower: f64, upper: f64 },
    #[error("binary variable {var} has bounds [{lower}, {upper}] outside [0, 1]")]
    BinaryBounds { var: String, lower: f64, upper: f64 },
    #[error("constraint {constraint} has a non-finite coefficient or right-hand side")]
    NonFiniteCoefficient { constraint: String },
    #[error("constraint {constraint} references an unknown variable")]
    UnknownVariable { constraint: String },
}

/// Solver parameters. Defaults mirror a 0.5% MIP gap and a six hour limit;
/// callers that need exact desk-scale answers pass `relative_gap: 0.0`.
#[derive(Debug, Clone)]
pub struct SolveParams {
    pub relative_gap: f64,
    pub time_limit: f64,
    pub warm_start: Option<BTreeMap<String, f64>>,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            relative_gap: 0.005,
            time_limit: 21_600.0,
            warm_start: None,
        }
    }
}

impl SolveParams {
    pub fn exact() -> Self {
        SolveParams {
            relative_gap: 0.0,
            ..Default::default()
        }
    }

    pub fn with_warm_start(mut self, assignment: BTreeMap<String, f64>) -> Self {
        self.warm_start = Some(assignment);
        self
    }

    fn validate(&self) -> Result<(), SolveError> {
        if !(self.relative_gap >= 0.0) {
            return Err(SolveError::BadParams("relative_gap must be >= 0".into()));
        }
        if !(self.time_limit > 0.0) {
            return Err(SolveError::BadParams("time_limit must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    GapReached,
    TimeLimit,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapReached => "gap_reached",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

/// Outcome of a solve: status, incumbent, bound, and the assignment keyed by
/// variable name.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub assignment: BTreeMap<String, f64>,
    pub wall_time: f64,
    pub node_count: u64,
    /// Incumbent objective in place before tree search started, i.e. the
    /// accepted warm start. `None` when no warm start was accepted.
    pub root_incumbent: Option<f64>,
}

impl SolveReport {
    pub fn is_solved(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::GapReached)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.assignment.get(name).copied()
    }
}

/// Relative MIP gap as reported by the solver.
pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() || !bound.is_finite() {
        return f64::INFINITY;
    }
    (objective - bound).max(0.0) / objective.abs().max(1e-9)
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solve parameters: {0}")]
    BadParams(String),
    #[error("assignment is missing variable {0}")]
    MissingVariable(String),
    #[error("numerical failure in LP relaxation: {0}")]
    Numerical(String),
}

/// A single violated constraint or integrality condition found by
/// [`check_feasible`].
#[derive(Debug, Clone)]
pub struct ConstraintViolation {
    /// Constraint name, or the variable name for bound/integrality violations.
    pub name: String,
    pub kind: ViolationKind,
    /// Amount by which the condition is violated (always positive).
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Row,
    Bound,
    Integrality,
}

impl std::fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            ViolationKind::Row => write!(f, "constraint {} violated by {:.3e}", self.name, self.amount),
            ViolationKind::Bound => write!(f, "bound on {} violated by {:.3e}", self.name, self.amount),
            ViolationKind::Integrality => {
                write!(f, "integrality of {} violated by {:.3e}", self.name, self.amount)
            }
        }
    }
}

/// Evaluates an assignment against every constraint, bound, and integrality
/// condition of the model. Violations are data, not errors; an incomplete
/// assignment is an error.
pub fn check_feasible(
    model: &MilpModel,
    assignment: &BTreeMap<String, f64>,
) -> Result<Vec<ConstraintViolation>, SolveError> {
    let mut values = vec![0.0; model.num_vars()];
    for (i, v) in model.variables().iter().enumerate() {
        match assignment.get(&v.name) {
            Some(&x) => values[i] = x,
            None => return Err(SolveError::MissingVariable(v.name.clone())),
        }
    }
    let mut out = Vec::new();
    for (i, v) in model.variables().iter().enumerate() {
        let x = values[i];
        let excess = (v.lower - x).max(x - v.upper);
        if excess > FEASIBILITY_TOL {
            out.push(ConstraintViolation {
                name: v.name.clone(),
                kind: ViolationKind::Bound,
                amount: excess,
            });
        }
        if v.kind.is_integral() {
            let frac = (x - x.round()).abs();
            if frac > INTEGRALITY_TOL {
                out.push(ConstraintViolation {
                    name: v.name.clone(),
                    kind: ViolationKind::Integrality,
                    amount: frac,
                });
            }
        }
    }
    for c in model.constraints() {
        let lhs: f64 = c.terms.iter().map(|&(v, coeff)| coeff * values[v.0]).sum();
        let violation = match c.relation {
            Relation::Le => lhs - c.rhs,
            Relation::Ge => c.rhs - lhs,
            Relation::Eq => (lhs - c.rhs).abs(),
        };
        if violation > FEASIBILITY_TOL {
            out.push(ConstraintViolation {
                name: c.name.clone(),
                kind: ViolationKind::Row,
                amount: violation,
            });
        }
    }
    Ok(out)
}

/// Solves the model by branch and bound over the simplex LP relaxation.
pub fn solve(model: &MilpModel, params: &SolveParams) -> Result<SolveReport, SolveError> {
    model.validate()?;
    params.validate()?;
    branch_bound::solve(model, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> MilpModel {
        let mut m = MilpModel::new("toy");
        let x = m.add_var("x", VarKind::Integer, 0.0, 10.0);
        m.add_constraint("floor", vec![(x, 1.0)], Relation::Ge, 3.0);
        m.set_objective(vec![(x, 1.0)], 0.0);
        m
    }

    #[test]
    fn validate_rejects_nan_coefficient() {
        let mut m = MilpModel::new("bad");
        let x = m.add_var("x", VarKind::Continuous, 0.0, 1.0);
        m.add_constraint("c", vec![(x, f64::NAN)], Relation::Le, 1.0);
        assert!(matches!(m.validate(), Err(ModelError::NonFiniteCoefficient { .. })));
    }

    #[test]
    fn validate_rejects_binary_outside_unit_interval() {
        let mut m = MilpModel::new("bad");
        m.add_var("b", VarKind::Binary, 0.0, 2.0);
        assert!(matches!(m.validate(), Err(ModelError::BinaryBounds { .. })));
    }

    #[test]
    fn validate_allows_infinite_bounds() {
        let mut m = MilpModel::new("ok");
        let x = m.add_var("x", VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("c", vec![(x, 1.0)], Relation::Ge, 0.0);
        assert!(m.validate().is_ok());
    }

    #[test]
    #[should_panic(expected = "duplicate variable name")]
    fn duplicate_names_rejected() {
        let mut m = MilpModel::new("dup");
        m.add_var("x", VarKind::Continuous, 0.0, 1.0);
        m.add_var("x", VarKind::Continuous, 0.0, 1.0);
    }

    #[test]
    fn check_feasible_flags_violated_row() {
        let m = toy_model();
        let mut a = BTreeMap::new();
        a.insert("x".to_string(), 0.0);
        let v = check_feasible(&m, &a).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].name, "floor");
        assert_eq!(v[0].kind, ViolationKind::Row);
    }

    #[test]
    fn check_feasible_flags_fractional_binary() {
        let mut m = MilpModel::new("frac");
        m.add_var("b", VarKind::Binary, 0.0, 1.0);
        let mut a = BTreeMap::new();
        a.insert("b".to_string(), 0.4);
        let v = check_feasible(&m, &a).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Integrality);
    }

    #[test]
    fn check_feasible_requires_complete_assignment() {
        let m = toy_model();
        let a = BTreeMap::new();
        assert!(matches!(
            check_feasible(&m, &a),
            Err(SolveError::MissingVariable(_))
        ));
    }

    #[test]
    fn accepted_solution_passes_check() {
        let m = toy_model();
        let report = solve(&m, &SolveParams::exact()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!((report.objective_value - 3.0).abs() < 1e-9);
        let v = check_feasible(&m, &report.assignment).unwrap();
        assert!(v.is_empty(), "unexpected violations: {v:?}");
    }
}
