//! Plan-by-plan equivalence between the big-M recourse model and the
//! independent z-pattern oracle, including generators with minimum outputs
//! where commitment itself is a decision.

mod common;

use std::collections::BTreeMap;

use floodgrid::formulations::{build_recourse, BuildOptions, HardeningPlan};
use floodgrid::grid::parse_grid;
use floodgrid::milp::{solve, SolveParams, SolveStatus};
use floodgrid::scenario::parse_scenarios;

use common::{desk_grid, desk_scenarios, enumerate_plans, oracle_recourse_shed};

#[test]
fn every_desk_plan_matches_the_oracle_in_every_scenario() {
    let grid = desk_grid();
    let set = desk_scenarios(&grid);
    let plans = enumerate_plans(&grid, &set);
    assert_eq!(plans.len(), 48); // (5+1) x (3+1) x (1+1)
    for plan in &plans {
        for scenario in set.scenarios() {
            let stage =
                build_recourse(&grid, &set, plan, scenario, &BuildOptions::default()).unwrap();
            let report = solve(&stage.model, &SolveParams::exact()).unwrap();
            assert_eq!(report.status, SolveStatus::Optimal);
            let expected = oracle_recourse_shed(&grid, plan, scenario);
            assert!(
                (report.objective_value - expected).abs() < 1e-9,
                "plan {plan:?} scenario {}: model {} vs oracle {expected}",
                scenario.id,
                report.objective_value
            );
        }
    }
}

/// A generator whose minimum output exceeds the servable load must stay off;
/// one whose minimum fits should commit and serve.
#[test]
fn minimum_output_generators_agree_with_oracle() {
    let template = |gen_min: f64| {
        format!(
            r#"{{
                "base_mva": 100.0,
                "substations": [
                    {{"id": "s1", "fixed_cost": 1000.0, "variable_cost": 100.0,
                      "max_harden": 4, "bus_ids": ["b1"]}},
                    {{"id": "s2", "fixed_cost": 1000.0, "variable_cost": 100.0,
                      "max_harden": 4, "bus_ids": ["b2"]}}
                ],
                "buses": [
                    {{"id": "b1", "substation_id": "s1", "load": 0.0,
                      "gen_min": {gen_min}, "gen_max": 1.0, "is_reference": true}},
                    {{"id": "b2", "substation_id": "s2", "load": 0.5,
                      "gen_min": 0.0, "gen_max": 0.0, "is_reference": false}}
                ],
                "branches": [
                    {{"id": "r1", "from_bus": "b1", "to_bus": "b2",
                      "susceptance": 5.0, "capacity": 1.0}}
                ]
            }}"#
        )
    };
    for (gen_min, expected_shed) in [(0.8, 0.5), (0.2, 0.0)] {
        let grid = parse_grid(template(gen_min).as_bytes()).unwrap();
        let set = parse_scenarios(
            br#"{"scenarios": [{"id": "k", "depths": {"s2": 1}}]}"#,
            &grid,
        )
        .unwrap();
        // Harden the load substation so the bus is alive and the commitment
        // decision is the only thing that matters.
        let plan = HardeningPlan::from_heights(
            &grid,
            BTreeMap::from([(floodgrid::grid::SubstationId::from("s2"), 1)]),
        );
        let scenario = &set.scenarios()[0];
        let stage = build_recourse(&grid, &set, &plan, scenario, &BuildOptions::default()).unwrap();
        let report = solve(&stage.model, &SolveParams::exact()).unwrap();
        let oracle = oracle_recourse_shed(&grid, &plan, scenario);
        assert!(
            (report.objective_value - expected_shed).abs() < 1e-9,
            "gen_min={gen_min}: model shed {}",
            report.objective_value
        );
        assert!((oracle - expected_shed).abs() < 1e-9, "gen_min={gen_min}: oracle {oracle}");
        // The commitment binary itself tracks the decision.
        let u = report.assignment.get("u[b1,k]").copied().unwrap();
        assert_eq!(u.round() as u32, u32::from(expected_shed == 0.0));
    }
}

/// Flooding the generator's substation kills commitment regardless of the
/// minimum output.
#[test]
fn flooded_committed_generator_is_forced_off() {
    let doc = br#"{
        "base_mva": 100.0,
        "substations": [
            {"id": "s1", "fixed_cost": 1000.0, "variable_cost": 100.0,
             "max_harden": 4, "bus_ids": ["b1"]}
        ],
        "buses": [
            {"id": "b1", "substation_id": "s1", "load": 0.3,
             "gen_min": 0.1, "gen_max": 1.0, "is_reference": true}
        ],
        "branches": []
    }"#;
    let grid = parse_grid(doc).unwrap();
    let set = parse_scenarios(br#"{"scenarios": [{"id": "k", "depths": {"s1": 2}}]}"#, &grid)
        .unwrap();
    let scenario = &set.scenarios()[0];
    let stage = build_recourse(
        &grid,
        &set,
        &HardeningPlan::zero(),
        scenario,
        &BuildOptions::default(),
    )
    .unwrap();
    let report = solve(&stage.model, &SolveParams::exact()).unwrap();
    assert!((report.objective_value - 0.3).abs() < 1e-9);
    assert_eq!(report.assignment["u[b1,k]"].round() as u32, 0);
    assert_eq!(
        report.objective_value,
        oracle_recourse_shed(&grid, &HardeningPlan::zero(), scenario)
    );
}
