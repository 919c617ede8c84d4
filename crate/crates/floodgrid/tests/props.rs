//! Property tests over randomized grids, scenario sets, models, and
//! histograms.

use std::collections::BTreeMap;

use proptest::prelude::*;

use floodgrid::analysis::shed_histogram;
use floodgrid::grid::{
    grid_to_json, parse_grid, validate_grid, Branch, BranchId, Bus, BusId, Grid, Substation,
    SubstationId,
};
use floodgrid::milp::{mps, solve, MilpModel, Relation, SolveParams, VarKind};
use floodgrid::scenario::{FloodScenario, ScenarioId, ScenarioSet};

fn arb_grid() -> impl Strategy<Value = Grid> {
    let sub = (0u32..=8, 0u32..=50_000, 0u32..=20_000, 1usize..=2);
    proptest::collection::vec(sub, 1..=3)
        .prop_flat_map(|subs| {
            let num_buses: usize = subs.iter().map(|s| s.3).sum();
            let bus_data = proptest::collection::vec(
                (0u32..=10, 0u32..=12, 0u32..=10), // load*10, gen_max*10, gen_min share
                num_buses,
            );
            let branch_data = proptest::collection::vec(
                (0usize..num_buses.max(1), 0usize..num_buses.max(1), 1u32..=50, 1u32..=20),
                0..=4,
            );
            (Just(subs), bus_data, branch_data)
        })
        .prop_map(|(subs, bus_data, branch_data)| {
            let mut substations = Vec::new();
            let mut buses = Vec::new();
            let mut bus_idx = 0usize;
            for (i, (max_harden, fixed, variable, bus_count)) in subs.iter().enumerate() {
                let sid = SubstationId(format!("s{i}"));
                let mut bus_ids = Vec::new();
                for _ in 0..*bus_count {
                    let bid = BusId(format!("b{bus_idx}"));
                    let (load, gen_max, gen_min_share) = bus_data[bus_idx];
                    let gen_max = f64::from(gen_max) / 10.0;
                    buses.push(Bus {
                        id: bid.clone(),
                        substation_id: sid.clone(),
                        load: f64::from(load) / 10.0,
                        gen_min: gen_max * f64::from(gen_min_share) / 10.0,
                        gen_max,
                        is_reference: bus_idx == 0,
                    });
                    bus_ids.push(bid);
                    bus_idx += 1;
                }
                substations.push(Substation {
                    id: sid,
                    fixed_cost: f64::from(*fixed),
                    variable_cost: f64::from(*variable),
                    max_harden: *max_harden,
                    bus_ids,
                });
            }
            let branches = branch_data
                .iter()
                .enumerate()
                .filter(|(_, (from, to, _, _))| from != to)
                .map(|(i, (from, to, susceptance, capacity))| Branch {
                    id: BranchId(format!("r{i}")),
                    from_bus: buses[*from].id.clone(),
                    to_bus: buses[*to].id.clone(),
                    susceptance: f64::from(*susceptance) / 10.0,
                    capacity: f64::from(*capacity) / 10.0,
                })
                .collect();
            Grid {
                base_mva: 100.0,
                substations,
                buses,
                branches,
            }
        })
}

fn arb_scenarios() -> impl Strategy<Value = Vec<Vec<(usize, u32)>>> {
    // Per scenario: (substation index, depth) pairs.
    proptest::collection::vec(
        proptest::collection::vec((0usize..3, 0u32..=9), 0..=3),
        1..=5,
    )
}

proptest! {
    #[test]
    fn grid_json_round_trip(grid in arb_grid()) {
        prop_assert!(validate_grid(&grid).is_empty());
        let doc = grid_to_json(&grid);
        let back = parse_grid(doc.as_bytes()).unwrap();
        prop_assert_eq!(&grid, &back);
        // Orientation totals cover every branch once on each side.
        let mut total_in = 0;
        let mut total_out = 0;
        for bus in &grid.buses {
            let (i, o) = grid.incidence(&bus.id).unwrap();
            total_in += i.len();
            total_out += o.len();
        }
        prop_assert_eq!(total_in, grid.branches.len());
        prop_assert_eq!(total_out, grid.branches.len());
    }

    #[test]
    fn scenario_derivations_hold(grid in arb_grid(), raw in arb_scenarios()) {
        let n = raw.len();
        let scenarios: Vec<FloodScenario> = raw
            .iter()
            .enumerate()
            .map(|(i, pairs)| {
                let mut depths = BTreeMap::new();
                for (sub_idx, depth) in pairs {
                    if *depth > 0 {
                        if let Some(sub) = grid.substations.get(*sub_idx) {
                            depths.insert(sub.id.clone(), *depth);
                        }
                    }
                }
                FloodScenario {
                    id: ScenarioId(format!("k{i}")),
                    probability: 1.0 / n as f64,
                    depths,
                }
            })
            .collect();
        let set = ScenarioSet::new(scenarios, &grid).unwrap();
        for sub in set.flooded_substations() {
            prop_assert!(grid.substation(sub).is_some());
            let w = set.max_depth(sub);
            prop_assert!(w >= 1);
            for k in set.scenarios() {
                prop_assert!(k.depth(sub) <= w);
            }
        }
        let mean = set.mean_scenario();
        for (sub, depth) in &mean.depths {
            prop_assert!(*depth <= set.max_depth(sub));
        }
    }

    #[test]
    fn histogram_preserves_counts(
        sheds in proptest::collection::vec(0.0f64..100.0, 1..40),
        width in 0.5f64..20.0,
    ) {
        let bins = shed_histogram(&sheds, width).unwrap();
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), sheds.len());
        for bin in &bins {
            prop_assert!((bin.hi - bin.lo - width).abs() < 1e-9);
        }
    }
}

#[derive(Debug, Clone)]
struct RawModel {
    vars: Vec<(u8, i8, i8)>, // kind, lb, ub
    rows: Vec<(Vec<i8>, u8, i8)>,
    objective: Vec<i8>,
    constant: i8,
}

fn arb_model() -> impl Strategy<Value = RawModel> {
    (1usize..=5).prop_flat_map(|n| {
        let vars = proptest::collection::vec((0u8..3, -3i8..=0, 0i8..=4), n..=n);
        let rows = proptest::collection::vec(
            (proptest::collection::vec(-3i8..=3, n..=n), 0u8..3, -6i8..=6),
            0..=4,
        );
        let objective = proptest::collection::vec(-3i8..=3, n..=n);
        (vars, rows, objective, -2i8..=2).prop_map(|(vars, rows, objective, constant)| RawModel {
            vars,
            rows,
            objective,
            constant,
        })
    })
}

fn build_model(raw: &RawModel) -> MilpModel {
    let mut m = MilpModel::new("prop");
    let ids: Vec<_> = raw
        .vars
        .iter()
        .enumerate()
        .map(|(i, &(kind, lb, ub))| {
            let kind = match kind {
                0 => VarKind::Continuous,
                1 => VarKind::Integer,
                _ => VarKind::Binary,
            };
            let (lb, ub) = if kind == VarKind::Binary {
                (0.0, 1.0)
            } else {
                (f64::from(lb.min(ub)), f64::from(ub.max(lb)))
            };
            m.add_var(format!("v{i}"), kind, lb, ub)
        })
        .collect();
    for (r, (coeffs, rel, rhs)) in raw.rows.iter().enumerate() {
        let terms: Vec<_> = ids
            .iter()
            .zip(coeffs)
            .filter(|(_, &c)| c != 0)
            .map(|(&v, &c)| (v, f64::from(c)))
            .collect();
        if terms.is_empty() {
            continue;
        }
        let relation = match rel {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Eq,
        };
        m.add_constraint(format!("c{r}"), terms, relation, f64::from(*rhs));
    }
    m.set_objective(
        ids.iter()
            .zip(&raw.objective)
            .map(|(&v, &c)| (v, f64::from(c)))
            .collect(),
        f64::from(raw.constant),
    );
    m
}

proptest! {
    #[test]
    fn mps_round_trip_preserves_solutions(raw in arb_model()) {
        let model = build_model(&raw);
        let text = mps::export_mps(&model);
        let back = mps::import_mps(&text).unwrap();
        let a = solve(&model, &SolveParams::exact()).unwrap();
        let b = solve(&back, &SolveParams::exact()).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.is_solved() {
            prop_assert!(
                (a.objective_value - b.objective_value).abs() <= 1e-9,
                "objectives {} vs {}",
                a.objective_value,
                b.objective_value
            );
        }
    }
}
