mod support;

use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapelab_core::analysis::{
    attribute_demand_increases, impact, non_coal_coal_ratio, peak_gnd_reduction, peak_hours_delta, summarize_attribution, yearly_summary,
    HistoryDay, ImpactRecord,
};
use shapelab_core::dispatch::{co_optimize_benchmark, BenchmarkConfig, DayModel, DispatchResult};
use shapelab_core::grid::{FlexLoadSpec, GridCase, LoadShape, Technology, HOURS};
use shapelab_core::signals::{SignalId, SignalVector};
use shapelab_core::strategies::{shape_from_signal, StrategyId};
use support::hand_cases::{bus, date, flat_day, grid, unit};

/// Coal to 600 MW at 10 $/MWh and a large gas peaker at 40, inelastic
/// demand 300 + 20h MW.
fn ramp_case() -> GridCase {
    grid(vec![bus("a")], vec![], vec![unit("coal", "a", Technology::Coal, 600.0, 10.0), unit("peaker", "a", Technology::GasCt, 3000.0, 40.0)])
}

fn ramp_demand() -> [f64; HOURS] {
    std::array::from_fn(|h| 300.0 + 20.0 * h as f64)
}

fn solve_with(case: &GridCase, shape: &LoadShape) -> DispatchResult {
    let mut day = flat_day(case, &[]);
    day.demand[0] = ramp_demand();
    DayModel::new(case, &day).unwrap().solve(shape, None).unwrap()
}

/// Flat and two shapes ranked on demand: `shed` lowers the nine highest
/// hours, `pile` raises them.
fn ramp_runs() -> (GridCase, DispatchResult, DispatchResult, DispatchResult) {
    let case = ramp_case();
    let spec = FlexLoadSpec::new("a");
    let sig = |id| SignalVector::new(id, "a", ramp_demand()).unwrap();
    let flat = solve_with(&case, &LoadShape::flat(std::slice::from_ref(&spec)).unwrap());
    let shed = solve_with(&case, &shape_from_signal(&sig(SignalId::Lmp), &spec).unwrap());
    let pile = solve_with(&case, &shape_from_signal(&sig(SignalId::Zws), &spec).unwrap());
    (case, flat, shed, pile)
}

#[test]
fn moving_coal_hours_into_wind_saves_the_hand_computed_amount() {
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
    let opt = co_optimize_benchmark(&model, Some(&flat), &BenchmarkConfig::new(vec![spec], vec![])).unwrap();
    let d = impact(&flat, &opt.dispatch).unwrap();
    assert!((d.co2_t - 582.48).abs() < 1e-6, "{}", d.co2_t);
    // 720 MWh leave coal at 20 $/MWh for free wind.
    assert!((d.cost + 14_400.0).abs() < 1e-6, "{}", d.cost);
    assert_eq!(impact(&flat, &flat).unwrap().co2_t, 0.0);
}

#[test]
fn peak_hours_see_the_peaker_back_off() {
    let (case, flat, shed, _) = ramp_runs();
    let d = peak_hours_delta(&case, &[&flat], &[&shed], 1).unwrap();
    assert_eq!(d.hours, vec![(date(), 23)]);
    let by = |t: Technology| d.per_technology.iter().find(|x| x.0 == t).unwrap().1;
    assert!((by(Technology::GasCt) - 80.0).abs() < 1e-6);
    assert!(by(Technology::Coal).abs() < 1e-6);
    let nine = peak_hours_delta(&case, &[&flat], &[&shed], 9).unwrap();
    assert!((nine.per_technology.iter().find(|x| x.0 == Technology::GasCt).unwrap().1 - 80.0).abs() < 1e-6);
    assert!(peak_hours_delta(&case, &[&flat], &[&shed], 100).unwrap().short);
}

#[test]
fn peak_reduction_has_the_sign_of_the_peak_hour_change() {
    let (case, flat, shed, pile) = ramp_runs();
    let down = peak_gnd_reduction(&case, &[&flat], &[&shed]).unwrap();
    assert_eq!(down.hour, 23);
    assert!((down.baseline_mw - 1160.0).abs() < 1e-9);
    assert!((down.reduction_mw - 80.0).abs() < 1e-9);
    assert!((down.change_at_peak_mw + 80.0).abs() < 1e-9);
    let up = peak_gnd_reduction(&case, &[&flat], &[&pile]).unwrap();
    assert!((up.reduction_mw + 80.0).abs() < 1e-9);
    assert!(peak_gnd_reduction(&case, &[], &[]).is_err());
}

#[test]
fn increases_are_attributed_to_the_units_that_ramp() {
    let case = ramp_case();
    let model_day = |d: NaiveDate, demand: [f64; HOURS]| {
        let mut day = flat_day(&case, &[]);
        day.date = d;
        day.demand[0] = demand;
        DayModel::new(&case, &day).unwrap().solve_demand(&day.demand, None).unwrap()
    };
    let first = model_day(date(), ramp_demand());
    let next = model_day(date() + Days::new(1), [800.0; HOURS]);
    let later = model_day(date() + Days::new(3), [800.0; HOURS]);
    let rows = attribute_demand_increases(&case, &[hist(&first), hist(&next), hist(&later)]);
    // Hours 1-15 ramp coal up to 600 MW, hours 16-23 the peaker, and the
    // step from 760 to 800 MW across midnight the peaker again. The gap
    // before the third day breaks the chain.
    assert_eq!(rows.len(), 24);
    assert!(rows[..15].iter().all(|r| r.shares == vec![(Technology::Coal, 1.0)]));
    assert!(rows[15..].iter().all(|r| r.shares == vec![(Technology::GasCt, 1.0)]));
    let cross = rows.last().unwrap();
    assert_eq!((cross.date, cross.hour), (date() + Days::new(1), 0));
    assert!((cross.increase_mw - 40.0).abs() < 1e-9);
    assert!((non_coal_coal_ratio(&rows, |_| true) - 9.0 / 15.0).abs() < 1e-12);

    let summary = summarize_attribution(&rows);
    let coal = summary.iter().find(|s| s.technology == Technology::Coal).unwrap();
    assert_eq!(coal.hours, 24);
    assert!((coal.frequency - 15.0 / 24.0).abs() < 1e-12);
}

fn hist(d: &DispatchResult) -> HistoryDay<'_> {
    HistoryDay { dispatch: d, min_lmp: 10.0, regime: None }
}

fn record(day: u64, strategy: StrategyId, group: &str, co2: f64, price: f64, weight: f64) -> ImpactRecord {
    ImpactRecord {
        date: date() + Days::new(day),
        strategy,
        group: group.into(),
        co2_t: co2,
        cost: -co2 * 3.0,
        payment: co2 * 0.5,
        avg_price: price,
        demand_mwh: weight,
        regime: None,
        min_lmp: vec![],
    }
}

#[test]
fn summary_weights_price_changes_by_demand() {
    let rows = [record(0, StrategyId::Lmp, "a", 1.0, 2.0, 100.0), record(1, StrategyId::Lmp, "a", 3.0, 4.0, 300.0)];
    let t = yearly_summary(&rows);
    assert_eq!(t.len(), 1);
    assert_eq!((t[0].days, t[0].co2_t), (2, 4.0));
    assert!((t[0].avg_price - 3.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summary_ignores_record_order(
        rows in prop::collection::vec((0u64..30, 0usize..3, 0usize..2, -1e3..1e3f64, -5.0..5.0f64, 1.0..1e5f64), 1..60),
        seed in any::<u64>(),
    ) {
        let ids = [StrategyId::Lmp, StrategyId::Zws, StrategyId::Wme];
        let mut seen = std::collections::HashSet::new();
        let records: Vec<ImpactRecord> = rows
            .iter()
            .filter(|r| seen.insert((r.0, r.1, r.2)))
            .map(|r| record(r.0, ids[r.1], ["a", "a+b"][r.2], r.3, r.4, r.5))
            .collect();
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(yearly_summary(&records), yearly_summary(&shuffled));
        let total: f64 = yearly_summary(&records).iter().map(|t| t.days as f64).sum();
        prop_assert_eq!(total as usize, records.len());
    }
}
