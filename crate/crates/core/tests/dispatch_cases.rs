mod support;

use proptest::prelude::*;
use shapelab_core::dispatch::{co_optimize_benchmark, marginal_emissions, solve_day, BenchmarkConfig, DayModel};
use shapelab_core::grid::{FlexLoadSpec, LoadShape, Technology, HOURS};
use shapelab_core::Error;
use support::hand_cases::{self, bus, flat_day, grid, line, unit};
use support::merit;

const TOL: f64 = 1e-6;

#[test]
fn hand_cases_match() {
    for c in hand_cases::all() {
        let r = hand_cases::solve(&c);
        let err = hand_cases::max_error(&c, &r);
        assert!(err <= TOL, "{}: deviation {err}", c.name);
    }
}

#[test]
fn uncongested_prices_are_equal_and_congestion_separates_them() {
    let r = hand_cases::solve(&hand_cases::triangle());
    for h in 0..HOURS {
        assert!((r.lmp[0][h] - r.lmp[1][h]).abs() < TOL && (r.lmp[1][h] - r.lmp[2][h]).abs() < TOL);
    }
    let r = hand_cases::solve(&hand_cases::congested_two_bus());
    assert!(r.lmp[1][0] - r.lmp[0][0] > 1.0);
}

#[test]
fn curtailment_is_available_minus_dispatched() {
    let r = hand_cases::solve(&hand_cases::congested_two_bus());
    for h in 0..HOURS {
        assert!((r.curtailment[0][h] - 150.0).abs() < TOL);
        assert_eq!(r.curtailment[1][h], 0.0);
    }
}

#[test]
fn marginal_emissions_follow_the_local_marginal_unit() {
    let c = hand_cases::congested_two_bus();
    let model = DayModel::new(&c.case, &c.day).unwrap();
    let base = model.solve_demand(&c.day.demand, None).unwrap();
    let at_a = marginal_emissions(&model, &base, 0, 5, 1.0).unwrap();
    let at_b = marginal_emissions(&model, &base, 1, 5, 1.0).unwrap();
    assert!((at_a - 11.0).abs() < 1e-6, "{at_a}");
    assert!((at_b - 490.0).abs() < 1e-6, "{at_b}");
    let twice = marginal_emissions(&model, &base, 1, 5, 2.0).unwrap();
    assert!((twice - at_b).abs() < 1e-6);
}

#[test]
fn infeasible_day_names_the_hour() {
    let case = grid(vec![bus("a")], vec![], vec![unit("gas", "a", Technology::GasCt, 500.0, 30.0)]);
    let mut day = flat_day(&case, &[("a", 50.0)]);
    day.demand[0][17] = 200.0;
    let shape = LoadShape::flat(&[FlexLoadSpec::new("a")]).unwrap();
    match solve_day(&case, &day, &shape) {
        Err(Error::Infeasible { hour, .. }) => assert_eq!(hour, Some(17)),
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

/// Coal serves the first nine hours, wind with room to spare the other
/// fifteen. Moving 80 MW out of every coal hour into wind hours saves
/// 9 * 80 * (820 - 11) / 1000 = 582.48 t.
#[test]
fn benchmark_moves_load_from_coal_into_wind() {
    let case = grid(
        vec![bus("a")],
        vec![],
        vec![unit("wind", "a", Technology::Wind, 2000.0, 0.0), unit("coal", "a", Technology::Coal, 2000.0, 20.0)],
    );
    let mut day = flat_day(&case, &[("a", 500.0)]);
    for h in 0..9 {
        day.availability[0][h] = 0.0;
    }
    let spec = FlexLoadSpec::new("a");
    let model = DayModel::new(&case, &day).unwrap();
    let flat = model.solve(&LoadShape::flat(std::slice::from_ref(&spec)).unwrap(), None).unwrap();
    let out = co_optimize_benchmark(&model, Some(&flat), &BenchmarkConfig::new(vec![spec.clone()], vec![])).unwrap();
    assert!((flat.emissions_t - out.dispatch.emissions_t - 582.48).abs() < 1e-6);
    let node = &out.shape.nodes()[0];
    assert!((0..9).all(|h| node.mw[h] == 320));
    assert_eq!((9..HOURS).filter(|&h| node.mw[h] == 480).count(), 9);

    let table = merit::level_table(&case, &day, &spec).unwrap();
    let best = merit::exhaustive_minimum(&table, 9, 9);
    assert!((best - out.dispatch.emissions_t).abs() < 1e-6);
}

#[test]
fn zero_penalty_benchmark_is_no_dearer_than_flat() {
    let case = grid(
        vec![bus("a")],
        vec![],
        vec![unit("gas", "a", Technology::GasCc, 3000.0, 25.0), unit("coal", "a", Technology::Coal, 700.0, 15.0)],
    );
    let mut day = flat_day(&case, &[("a", 0.0)]);
    for h in 0..HOURS {
        day.demand[0][h] = 300.0 + 20.0 * h as f64;
    }
    let spec = FlexLoadSpec::new("a");
    let model = DayModel::new(&case, &day).unwrap();
    let flat = model.solve(&LoadShape::flat(std::slice::from_ref(&spec)).unwrap(), None).unwrap();
    let mut cfg = BenchmarkConfig::new(vec![spec], vec![]);
    cfg.co2_penalty_sweep = vec![0.0];
    cfg.separable = false;
    let out = co_optimize_benchmark(&model, Some(&flat), &cfg).unwrap();
    let zero = &out.candidates[0];
    assert!(zero.total_cost <= flat.total_cost + 1e-6, "{} > {}", zero.total_cost, flat.total_cost);
}

fn two_bus(limit: f64, wind: f64, gas_bid: f64, coal_bid: f64, demand_b: f64) -> (shapelab_core::grid::GridCase, shapelab_core::dispatch::DayScenario) {
    let case = grid(
        vec![bus("a"), bus("b")],
        vec![line("ab", "a", "b", 8.0, limit)],
        vec![
            unit("wind", "a", Technology::Wind, wind, 0.0),
            unit("coal", "a", Technology::Coal, 400.0, coal_bid),
            unit("gas", "b", Technology::GasCc, 2000.0, gas_bid),
        ],
    );
    let day = flat_day(&case, &[("b", demand_b)]);
    (case, day)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn balance_and_limits_hold(limit in 10.0..400.0f64, wind in 0.0..600.0f64, gas_bid in 20.0..60.0f64, coal_bid in 5.0..40.0f64, d in 50.0..1500.0f64) {
        let (case, day) = two_bus(limit, wind, gas_bid, coal_bid, d);
        let model = DayModel::new(&case, &day).unwrap();
        let r = model.solve_demand(&day.demand, None).unwrap();
        for h in 0..HOURS {
            let gen: f64 = r.gen_mw.iter().map(|g| g[h]).sum();
            prop_assert!((gen - d).abs() <= 1e-7 * d.max(1.0));
            prop_assert!(r.flow[0][h].abs() <= limit + 1e-7);
        }
    }

    #[test]
    fn raising_a_bid_never_lowers_cost(bump in 0.0..30.0f64, which in 0usize..3, d in 50.0..1500.0f64) {
        let (case, day) = two_bus(120.0, 300.0, 35.0, 18.0, d);
        let cost = |c: &shapelab_core::grid::GridCase| DayModel::new(c, &day).unwrap().solve_demand(&day.demand, None).unwrap().total_cost;
        let before = cost(&case);
        let mut dearer = case.clone();
        dearer.generators[which].bid += bump;
        prop_assert!(cost(&dearer) >= before - 1e-6);
    }
}
