//! Independent oracle for single-bus days: merit-order dispatch hour by
//! hour and exhaustive search over all three-level shapes.

#![allow(dead_code)]

use shapelab_core::dispatch::DayScenario;
use shapelab_core::grid::{BusSpec, FlexLoadSpec, GridCase, HOURS};

pub const HUB: &str = "hub";

/// Single-bus copy of a case: every unit on one bus, energy-budgeted units
/// dropped, bids spread by 1e-4 $/MWh per unit so the merit order is unique.
pub fn collapse(case: &GridCase, day: &DayScenario) -> (GridCase, DayScenario) {
    let keep: Vec<usize> = (0..case.generators.len()).filter(|&g| case.generators[g].daily_energy_budget.is_none()).collect();
    let generators = keep
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let mut u = case.generators[g].clone();
            u.bus = HUB.into();
            u.bid += 1e-4 * k as f64;
            u
        })
        .collect();
    let single = GridCase {
        buses: vec![BusSpec { id: HUB.into(), zone: HUB.into() }],
        lines: vec![],
        generators,
        carbon: case.carbon.clone(),
        slack_bus: HUB.into(),
        base_mva: case.base_mva,
    };
    let scenario = DayScenario {
        date: day.date,
        demand: vec![day.total_demand()],
        availability: keep.iter().map(|&g| day.availability[g]).collect(),
    };
    (single, scenario)
}

/// tCO2 of serving `demand` MW for one hour: every unit at its minimum, then
/// the cheapest bids first. `None` when supply cannot match demand.
pub fn merit_hour(case: &GridCase, day: &DayScenario, hour: usize, demand: f64) -> Option<f64> {
    let mut order: Vec<usize> = (0..case.generators.len()).collect();
    order.sort_by(|&a, &b| case.generators[a].bid.total_cmp(&case.generators[b].bid));
    let mut out = vec![0.0; case.generators.len()];
    let mut left = demand;
    for (g, spec) in case.generators.iter().enumerate() {
        out[g] = spec.p_min;
        left -= spec.p_min;
    }
    if left < -1e-9 {
        return None;
    }
    for &g in &order {
        let spec = &case.generators[g];
        let room = day.availability[g][hour] * spec.p_max - spec.p_min;
        let take = left.min(room.max(0.0));
        out[g] += take;
        left -= take;
    }
    if left > 1e-6 {
        return None;
    }
    Some(case.generators.iter().zip(&out).map(|(s, p)| p * case.carbon.intensity(s.technology) / 1000.0).sum())
}

/// Hourly emissions with the flexible load down, flat and up.
pub fn level_table(case: &GridCase, day: &DayScenario, spec: &FlexLoadSpec) -> Option<Vec<[f64; 3]>> {
    (0..HOURS)
        .map(|h| {
            let d = day.demand[0][h] + spec.base as f64;
            let delta = spec.delta as f64;
            Some([merit_hour(case, day, h, d - delta)?, merit_hour(case, day, h, d)?, merit_hour(case, day, h, d + delta)?])
        })
        .collect()
}

/// Minimum total emissions over every shape with `n_up` raised and `n_down`
/// lowered hours. Every raised set is enumerated; given it, the best lowered
/// set is the `n_down` remaining hours that save the most.
pub fn exhaustive_minimum(table: &[[f64; 3]], n_up: usize, n_down: usize) -> f64 {
    assert_eq!(table.len(), HOURS);
    let flat: f64 = table.iter().map(|t| t[1]).sum();
    let up: Vec<f64> = table.iter().map(|t| t[2] - t[1]).collect();
    let down: Vec<f64> = table.iter().map(|t| t[0] - t[1]).collect();
    let mut best = f64::INFINITY;
    let mut rest = Vec::with_capacity(HOURS);
    // Gosper's hack over 24-bit masks with n_up bits set.
    let mut mask: u32 = (1 << n_up) - 1;
    while mask < 1 << HOURS {
        let mut total = flat;
        rest.clear();
        for h in 0..HOURS {
            if mask >> h & 1 == 1 {
                total += up[h];
            } else {
                rest.push(down[h]);
            }
        }
        rest.select_nth_unstable_by(n_down - 1, f64::total_cmp);
        total += rest[..n_down].iter().sum::<f64>();
        best = best.min(total);
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    best
}
