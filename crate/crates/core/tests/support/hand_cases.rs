//! Small networks whose dispatch, flows and prices are worked out by hand.

#![allow(dead_code)]

use chrono::NaiveDate;
use shapelab_core::dispatch::{DayModel, DayScenario, DispatchResult};
use shapelab_core::grid::{BusSpec, CarbonTable, FlexLoadSpec, GeneratorSpec, GridCase, LineSpec, LoadShape, Technology, HOURS};

pub fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 1, 1).unwrap()
}

pub fn bus(id: &str) -> BusSpec {
    BusSpec { id: id.into(), zone: "z".into() }
}

pub fn line(id: &str, from: &str, to: &str, susceptance: f64, limit: f64) -> LineSpec {
    LineSpec { id: id.into(), from_bus: from.into(), to_bus: to.into(), susceptance, flow_limit: limit }
}

pub fn unit(id: &str, bus: &str, technology: Technology, p_max: f64, bid: f64) -> GeneratorSpec {
    GeneratorSpec { id: id.into(), bus: bus.into(), technology, p_min: 0.0, p_max, bid, daily_energy_budget: None }
}

pub fn grid(buses: Vec<BusSpec>, lines: Vec<LineSpec>, generators: Vec<GeneratorSpec>) -> GridCase {
    let slack_bus = buses[0].id.clone();
    GridCase { buses, lines, generators, carbon: CarbonTable::default(), slack_bus, base_mva: 100.0 }
}

/// Constant demand per bus and full availability.
pub fn flat_day(case: &GridCase, demand: &[(&str, f64)]) -> DayScenario {
    let demand = case
        .buses
        .iter()
        .map(|b| [demand.iter().find(|(id, _)| *id == b.id).map_or(0.0, |d| d.1); HOURS])
        .collect();
    DayScenario { date: date(), demand, availability: vec![[1.0; HOURS]; case.generators.len()] }
}

pub struct HandCase {
    pub name: &'static str,
    pub case: GridCase,
    pub day: DayScenario,
    pub shape: Option<LoadShape>,
    /// MW per generator, every hour.
    pub gen: Vec<(&'static str, f64)>,
    /// MW per line, every hour, positive from `from_bus`.
    pub flow: Vec<(&'static str, f64)>,
    /// $/MWh per bus, every hour.
    pub lmp: Vec<(&'static str, f64)>,
    pub emissions_t: Option<f64>,
}

/// One gas unit (bid 30, 500 MW) serving 100 MW plus a flat 400 MW flexible
/// load: 500 MW every hour at 30 $/MWh, 500 * 24 * 490 / 1000 = 5880 t.
pub fn one_bus() -> HandCase {
    let case = grid(vec![bus("a")], vec![], vec![unit("gas", "a", Technology::GasCt, 500.0, 30.0)]);
    let day = flat_day(&case, &[("a", 100.0)]);
    HandCase {
        name: "1-bus",
        shape: Some(LoadShape::flat(&[FlexLoadSpec::new("a")]).unwrap()),
        case,
        day,
        gen: vec![("gas", 500.0)],
        flow: vec![],
        lmp: vec![("a", 30.0)],
        emissions_t: Some(5880.0),
    }
}

/// Free wind at A behind a 50 MW line, gas (bid 30) at B, 120 MW at B. The
/// line binds: wind exports 50, gas covers 70, A prices at the wind bid and
/// B at the gas bid.
pub fn congested_two_bus() -> HandCase {
    let case = grid(
        vec![bus("a"), bus("b")],
        vec![line("ab", "a", "b", 10.0, 50.0)],
        vec![unit("wind", "a", Technology::Wind, 200.0, 0.0), unit("gas", "b", Technology::GasCt, 500.0, 30.0)],
    );
    let day = flat_day(&case, &[("b", 120.0)]);
    HandCase {
        name: "congested 2-bus",
        case,
        day,
        shape: None,
        gen: vec![("wind", 50.0), ("gas", 70.0)],
        flow: vec![("ab", 50.0)],
        lmp: vec![("a", 0.0), ("b", 30.0)],
        emissions_t: Some((50.0 * 11.0 + 70.0 * 490.0) * 24.0 / 1000.0),
    }
}

/// Triangle with equal susceptances, 90 MW injected at 1 and withdrawn at 3.
/// The direct path has half the reactance of the path through 2, so it
/// carries two thirds: 60 on 1-3, 30 on 1-2 and 2-3. No line binds.
pub fn triangle() -> HandCase {
    let case = grid(
        vec![bus("n1"), bus("n2"), bus("n3")],
        vec![line("l12", "n1", "n2", 5.0, 100.0), line("l23", "n2", "n3", 5.0, 100.0), line("l13", "n1", "n3", 5.0, 100.0)],
        vec![unit("cheap", "n1", Technology::Coal, 200.0, 10.0), unit("dear", "n2", Technology::GasCc, 200.0, 20.0)],
    );
    let day = flat_day(&case, &[("n3", 90.0)]);
    HandCase {
        name: "3-bus loop flow",
        case,
        day,
        shape: None,
        gen: vec![("cheap", 90.0), ("dear", 0.0)],
        flow: vec![("l12", 30.0), ("l23", 30.0), ("l13", 60.0)],
        lmp: vec![("n1", 10.0), ("n2", 10.0), ("n3", 10.0)],
        emissions_t: Some(90.0 * 24.0 * 820.0 / 1000.0),
    }
}

/// The triangle with line 1-3 limited to 50 MW. With injections p1 and p2
/// and the load at 3, f13 = (2 p1 + p2) / 3 and f12 = (p1 - p2) / 3. The
/// limit and p1 + p2 = 90 give p1 = 60, p2 = 30; flows 50, 10 and 40. One
/// more MW at 3 costs 2 * 20 - 10 = 30, at 2 it is served by unit 2 (20),
/// at 1 by unit 1 (10).
pub fn congested_triangle() -> HandCase {
    let mut c = triangle();
    c.name = "congested 3-bus loop flow";
    c.case.lines[2].flow_limit = 50.0;
    c.gen = vec![("cheap", 60.0), ("dear", 30.0)];
    c.flow = vec![("l12", 10.0), ("l23", 40.0), ("l13", 50.0)];
    c.lmp = vec![("n1", 10.0), ("n2", 20.0), ("n3", 30.0)];
    c.emissions_t = Some((60.0 * 820.0 + 30.0 * 490.0) * 24.0 / 1000.0);
    c
}

pub fn all() -> Vec<HandCase> {
    vec![one_bus(), congested_two_bus(), triangle(), congested_triangle()]
}

pub fn solve(c: &HandCase) -> DispatchResult {
    let model = DayModel::new(&c.case, &c.day).unwrap();
    match &c.shape {
        Some(s) => model.solve(s, None).unwrap(),
        None => model.solve_demand(&c.day.demand, None).unwrap(),
    }
}

/// Largest absolute deviation from the hand solution over every hour.
pub fn max_error(c: &HandCase, r: &DispatchResult) -> f64 {
    let mut err: f64 = 0.0;
    for h in 0..HOURS {
        for (id, mw) in &c.gen {
            err = err.max((r.gen_mw[c.case.generator_index(id).unwrap()][h] - mw).abs());
        }
        for (id, mw) in &c.flow {
            let l = c.case.lines.iter().position(|l| l.id == *id).unwrap();
            err = err.max((r.flow[l][h] - mw).abs());
        }
        for (id, p) in &c.lmp {
            err = err.max((r.lmp[c.case.bus_index(id).unwrap()][h] - p).abs());
        }
    }
    if let Some(e) = c.emissions_t {
        err = err.max((r.emissions_t - e).abs());
    }
    err
}
