//! Power network domain types, JSON ingestion, and structural validation.
//!
//! All power quantities are per-unit on `base_mva`; hardening heights are
//! whole feet. A grid file carries no flood information — flood exposure
//! lives in scenario files.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(SubstationId);
id_type!(BusId);
id_type!(BranchId);

/// A substation: the unit of hardening. Hardening substation `i` to height
/// `x` costs `fixed_cost + variable_cost * x` once chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substation {
    pub id: SubstationId,
    /// Fixed cost of hardening, dollars.
    pub fixed_cost: f64,
    /// Variable cost of hardening, dollars per foot.
    pub variable_cost: f64,
    /// Maximum flood height the substation can be hardened to, feet.
    pub max_harden: u32,
    /// Buses housed at this substation.
    pub bus_ids: Vec<BusId>,
}

/// A bus: load, aggregated generation interval, and reference flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub substation_id: SubstationId,
    /// Demand at the bus, per-unit.
    pub load: f64,
    /// Minimum generation when the generator is committed, per-unit.
    #[serde(default)]
    pub gen_min: f64,
    /// Maximum generation, per-unit.
    #[serde(default)]
    pub gen_max: f64,
    /// Exactly one bus per grid carries the reference angle.
    #[serde(default)]
    pub is_reference: bool,
}

/// A branch between two buses. Parallel branches are permitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: BranchId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Susceptance, per-unit.
    pub susceptance: f64,
    /// Flow capacity in either direction, per-unit.
    pub capacity: f64,
}

/// The physical network. Immutable after construction; shareable across
/// concurrent readers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Megawatts per per-unit for human-facing conversions.
    pub base_mva: f64,
    pub substations: Vec<Substation>,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("grid is structurally invalid: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A single structural defect, reported against the offending record.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateId { kind: &'static str, id: String },
    DanglingReference { kind: &'static str, id: String, missing: String },
    NoReferenceBus,
    MultipleReferenceBuses { ids: Vec<String> },
    EmptyBusList { substation: SubstationId },
    BusMembershipMismatch { bus: BusId, listed_in: SubstationId, declares: SubstationId },
    BusInMultipleSubstations { bus: BusId },
    BusNotListed { bus: BusId, substation: SubstationId },
    NegativeCost { substation: SubstationId },
    NegativeLoad { bus: BusId },
    BadGenerationBounds { bus: BusId, gen_min: f64, gen_max: f64 },
    NonPositiveCapacity { branch: BranchId },
    NonPositiveSusceptance { branch: BranchId },
    SelfLoop { branch: BranchId },
    BadBaseMva { base_mva: f64 },
    NonFiniteField { kind: &'static str, id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { kind, id } => write!(f, "duplicate {kind} id {id}"),
            Violation::DanglingReference { kind, id, missing } => {
                write!(f, "{kind} {id} references missing {missing}")
            }
            Violation::NoReferenceBus => write!(f, "no bus has is_reference = true"),
            Violation::MultipleReferenceBuses { ids } => {
                write!(f, "multiple reference buses: {}", ids.join(", "))
            }
            Violation::EmptyBusList { substation } => {
                write!(f, "substation {substation} has an empty bus list")
            }
            Violation::BusMembershipMismatch { bus, listed_in, declares } => write!(
                f,
                "bus {bus} is listed at substation {listed_in} but declares substation {declares}"
            ),
            Violation::BusInMultipleSubstations { bus } => {
                write!(f, "bus {bus} appears in more than one substation's bus list")
            }
            Violation::BusNotListed { bus, substation } => {
                write!(f, "bus {bus} declares substation {substation} but is not in its bus list")
            }
            Violation::NegativeCost { substation } => {
                write!(f, "substation {substation} has a negative hardening cost")
            }
            Violation::NegativeLoad { bus } => write!(f, "bus {bus} has a negative load"),
            Violation::BadGenerationBounds { bus, gen_min, gen_max } => write!(
                f,
                "bus {bus} violates 0 <= gen_min <= gen_max (gen_min={gen_min}, gen_max={gen_max})"
            ),
            Violation::NonPositiveCapacity { branch } => {
                write!(f, "branch {branch} has non-positive capacity")
            }
            Violation::NonPositiveSusceptance { branch } => {
                write!(f, "branch {branch} has non-positive susceptance")
            }
            Violation::SelfLoop { branch } => {
                write!(f, "branch {branch} connects a bus to itself")
            }
            Violation::BadBaseMva { base_mva } => {
                write!(f, "base_mva must be a positive finite number, got {base_mva}")
            }
            Violation::NonFiniteField { kind, id } => {
                write!(f, "{kind} {id} has a non-finite numeric field")
            }
        }
    }
}

/// Parses and fully validates a grid document. The returned grid satisfies
/// every structural invariant (`validate_grid` is empty on it).
pub fn parse_grid(source: &[u8]) -> Result<Grid, GridError> {
    let grid: Grid = serde_json::from_slice(source)?;
    let violations = validate_grid(&grid);
    if violations.is_empty() {
        Ok(grid)
    } else {
        Err(GridError::Invalid(violations))
    }
}

/// Serializes a grid back to its JSON document form.
pub fn grid_to_json(grid: &Grid) -> String {
    let mut out = serde_json::to_string_pretty(grid).expect("grid serialization cannot fail");
    out.push('\n');
    out
}

/// Checks every structural invariant; violations are data, not failures.
pub fn validate_grid(grid: &Grid) -> Vec<Violation> {
    let mut out = Vec::new();

    if !grid.base_mva.is_finite() || grid.base_mva <= 0.0 {
        out.push(Violation::BadBaseMva { base_mva: grid.base_mva });
    }

    let mut sub_ids = HashSet::new();
    for s in &grid.substations {
        if !sub_ids.insert(&s.id) {
            out.push(Violation::DuplicateId { kind: "substation", id: s.id.0.clone() });
        }
        if !s.fixed_cost.is_finite() || !s.variable_cost.is_finite() {
            out.push(Violation::NonFiniteField { kind: "substation", id: s.id.0.clone() });
        } else if s.fixed_cost < 0.0 || s.variable_cost < 0.0 {
            out.push(Violation::NegativeCost { substation: s.id.clone() });
        }
        if s.bus_ids.is_empty() {
            out.push(Violation::EmptyBusList { substation: s.id.clone() });
        }
    }

    let bus_by_id: HashMap<&BusId, &Bus> = grid.buses.iter().map(|b| (&b.id, b)).collect();
    let mut bus_ids = HashSet::new();
    let mut references = Vec::new();
    for b in &grid.buses {
        if !bus_ids.insert(&b.id) {
            out.push(Violation::DuplicateId { kind: "bus", id: b.id.0.clone() });
        }
        if ![b.load, b.gen_min, b.gen_max].iter().all(|v| v.is_finite()) {
            out.push(Violation::NonFiniteField { kind: "bus", id: b.id.0.clone() });
            continue;
        }
        if b.load < 0.0 {
            out.push(Violation::NegativeLoad { bus: b.id.clone() });
        }
        if b.gen_min < 0.0 || b.gen_min > b.gen_max {
            out.push(Violation::BadGenerationBounds {
                bus: b.id.clone(),
                gen_min: b.gen_min,
                gen_max: b.gen_max,
            });
        }
        if b.is_reference {
            references.push(b.id.0.clone());
        }
        if !sub_ids.contains(&b.substation_id) {
            out.push(Violation::DanglingReference {
                kind: "bus",
                id: b.id.0.clone(),
                missing: format!("substation {}", b.substation_id),
            });
        }
    }
    match references.len() {
        0 => out.push(Violation::NoReferenceBus),
        1 => {}
        _ => out.push(Violation::MultipleReferenceBuses { ids: references }),
    }

    // Membership consistency in both directions: bus_ids lists resolve, are
    // disjoint, agree with each bus's declared substation, and cover every bus.
    let mut membership: HashMap<&BusId, &SubstationId> = HashMap::new();
    for s in &grid.substations {
        for bus_id in &s.bus_ids {
            match bus_by_id.get(bus_id) {
                None => out.push(Violation::DanglingReference {
                    kind: "substation",
                    id: s.id.0.clone(),
                    missing: format!("bus {bus_id}"),
                }),
                Some(bus) => {
                    if membership.insert(bus_id, &s.id).is_some() {
                        out.push(Violation::BusInMultipleSubstations { bus: bus_id.clone() });
                    } else if bus.substation_id != s.id {
                        out.push(Violation::BusMembershipMismatch {
                            bus: bus_id.clone(),
                            listed_in: s.id.clone(),
                            declares: bus.substation_id.clone(),
                        });
                    }
                }
            }
        }
    }
    for b in &grid.buses {
        if sub_ids.contains(&b.substation_id) && !membership.contains_key(&b.id) {
            out.push(Violation::BusNotListed {
                bus: b.id.clone(),
                substation: b.substation_id.clone(),
            });
        }
    }

    let mut branch_ids = HashSet::new();
    for r in &grid.branches {
        if !branch_ids.insert(&r.id) {
            out.push(Violation::DuplicateId { kind: "branch", id: r.id.0.clone() });
        }
        if !r.susceptance.is_finite() || !r.capacity.is_finite() {
            out.push(Violation::NonFiniteField { kind: "branch", id: r.id.0.clone() });
            continue;
        }
        if r.capacity <= 0.0 {
            out.push(Violation::NonPositiveCapacity { branch: r.id.clone() });
        }
        if r.susceptance <= 0.0 {
            out.push(Violation::NonPositiveSusceptance { branch: r.id.clone() });
        }
        if r.from_bus == r.to_bus {
            out.push(Violation::SelfLoop { branch: r.id.clone() });
        }
        for endpoint in [&r.from_bus, &r.to_bus] {
            if !bus_ids.contains(endpoint) {
                out.push(Violation::DanglingReference {
                    kind: "branch",
                    id: r.id.0.clone(),
                    missing: format!("bus {endpoint}"),
                });
            }
        }
    }

    out
}

impl Grid {
    pub fn bus(&self, id: &BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| &b.id == id)
    }

    pub fn substation(&self, id: &SubstationId) -> Option<&Substation> {
        self.substations.iter().find(|s| &s.id == id)
    }

    pub fn reference_bus(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.is_reference)
    }

    /// Total demand, per-unit.
    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.load).sum()
    }

    /// Branches incident on a bus, split by orientation: `(in, out)` where
    /// `out` holds branches whose head is the bus and `in` those whose tail
    /// is the bus.
    pub fn incidence(&self, bus: &BusId) -> Result<(BTreeSet<BranchId>, BTreeSet<BranchId>), UnknownBus> {
        if self.bus(bus).is_none() {
            return Err(UnknownBus(bus.clone()));
        }
        let mut incoming = BTreeSet::new();
        let mut outgoing = BTreeSet::new();
        for r in &self.branches {
            if &r.from_bus == bus {
                outgoing.insert(r.id.clone());
            }
            if &r.to_bus == bus {
                incoming.insert(r.id.clone());
            }
        }
        Ok((incoming, outgoing))
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown bus {0}")]
pub struct UnknownBus(pub BusId);

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn desk_grid_json() -> &'static str {
        include_str!("../../../data/desk_grid.json")
    }

    fn desk_grid() -> Grid {
        parse_grid(desk_grid_json().as_bytes()).unwrap()
    }

    #[test]
    fn desk_grid_counts() {
        let g = desk_grid();
        assert_eq!(g.substations.len(), 3);
        assert_eq!(g.buses.len(), 4);
        assert_eq!(g.branches.len(), 3);
        assert!(validate_grid(&g).is_empty());
    }

    #[test]
    fn dangling_branch_reference_rejected() {
        let mut g = desk_grid();
        g.branches[0].to_bus = BusId::from("nope");
        let violations = validate_grid(&g);
        assert!(violations.iter().any(|v| matches!(
            v,
            Violation::DanglingReference { kind: "branch", .. }
        )));
        let doc = grid_to_json(&g);
        assert!(matches!(
            parse_grid(doc.as_bytes()),
            Err(GridError::Invalid(_))
        ));
    }

    #[test]
    fn multiple_reference_buses_rejected() {
        let mut g = desk_grid();
        for b in &mut g.buses {
            b.is_reference = true;
        }
        let violations = validate_grid(&g);
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::MultipleReferenceBuses { .. })));
    }

    #[test]
    fn zero_reference_buses_rejected() {
        let mut g = desk_grid();
        for b in &mut g.buses {
            b.is_reference = false;
        }
        assert!(validate_grid(&g).contains(&Violation::NoReferenceBus));
    }

    #[test]
    fn inverted_generation_bounds_names_the_bus() {
        let mut g = desk_grid();
        g.buses[0].gen_min = 2.0;
        g.buses[0].gen_max = 1.0;
        let violations = validate_grid(&g);
        assert_eq!(violations.len(), 1);
        assert!(matches!(
            &violations[0],
            Violation::BadGenerationBounds { bus, .. } if bus == &g.buses[0].id
        ));
    }

    #[test]
    fn zero_capacity_names_the_branch() {
        let mut g = desk_grid();
        g.branches[1].capacity = 0.0;
        let violations = validate_grid(&g);
        assert_eq!(violations.len(), 1);
        assert!(matches!(
            &violations[0],
            Violation::NonPositiveCapacity { branch } if branch == &g.branches[1].id
        ));
    }

    #[test]
    fn duplicate_bus_id_detected() {
        let mut g = desk_grid();
        let dup = g.buses[0].clone();
        g.buses.push(dup);
        let violations = validate_grid(&g);
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateId { kind: "bus", .. })));
    }

    #[test]
    fn incidence_matches_fixture_topology() {
        // b1 has r2 incoming (b3 -> b1) and r1 outgoing (b1 -> b2).
        let g = desk_grid();
        let (incoming, outgoing) = g.incidence(&BusId::from("b1")).unwrap();
        assert_eq!(incoming, [BranchId::from("r2")].into_iter().collect());
        assert_eq!(outgoing, [BranchId::from("r1")].into_iter().collect());
    }

    #[test]
    fn incidence_of_isolated_bus_is_empty() {
        let mut g = desk_grid();
        g.substations.push(Substation {
            id: SubstationId::from("s4"),
            fixed_cost: 0.0,
            variable_cost: 0.0,
            max_harden: 0,
            bus_ids: vec![BusId::from("b5")],
        });
        g.buses.push(Bus {
            id: BusId::from("b5"),
            substation_id: SubstationId::from("s4"),
            load: 0.0,
            gen_min: 0.0,
            gen_max: 0.0,
            is_reference: false,
        });
        assert!(validate_grid(&g).is_empty());
        let (incoming, outgoing) = g.incidence(&BusId::from("b5")).unwrap();
        assert!(incoming.is_empty() && outgoing.is_empty());
    }

    #[test]
    fn incidence_unknown_bus_errors() {
        let g = desk_grid();
        assert_eq!(
            g.incidence(&BusId::from("zz")),
            Err(UnknownBus(BusId::from("zz")))
        );
    }

    #[test]
    fn incidence_totals_cover_every_branch() {
        let g = desk_grid();
        let mut total_in = 0;
        let mut total_out = 0;
        for b in &g.buses {
            let (i, o) = g.incidence(&b.id).unwrap();
            total_in += i.len();
            total_out += o.len();
        }
        assert_eq!(total_in, g.branches.len());
        assert_eq!(total_out, g.branches.len());
    }

    #[test]
    fn json_round_trip_is_identical() {
        let g = desk_grid();
        let doc = grid_to_json(&g);
        let again = parse_grid(doc.as_bytes()).unwrap();
        assert_eq!(g, again);
    }
}
