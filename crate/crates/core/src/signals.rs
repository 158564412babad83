//! Day-ahead signals a shaping strategy can follow.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dispatch::{marginal_emissions, marginal_unit, DayModel, DayScenario, DispatchResult};
use crate::error::{Error, Result};
use crate::grid::{GridCase, HOURS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalId {
    AvgCi,
    Lmp,
    Lme,
    Ws,
    Zws,
    Wme,
    Cfeg,
    Gnd,
}

/// Which end of a signal attracts additional load.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Add load where the signal is low (prices, emissions, net demand).
    LoadWhereLow,
    /// Add load where the signal is high (renewable output).
    LoadWhereHigh,
}

impl SignalId {
    pub const ALL: [SignalId; 8] = [
        SignalId::AvgCi,
        SignalId::Lmp,
        SignalId::Lme,
        SignalId::Ws,
        SignalId::Zws,
        SignalId::Wme,
        SignalId::Cfeg,
        SignalId::Gnd,
    ];

    pub fn orientation(self) -> Orientation {
        match self {
            SignalId::AvgCi | SignalId::Lmp | SignalId::Lme | SignalId::Wme | SignalId::Gnd => Orientation::LoadWhereLow,
            SignalId::Ws | SignalId::Zws | SignalId::Cfeg => Orientation::LoadWhereHigh,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalId::AvgCi => "avg_ci",
            SignalId::Lmp => "lmp",
            SignalId::Lme => "lme",
            SignalId::Ws => "ws",
            SignalId::Zws => "zws",
            SignalId::Wme => "wme",
            SignalId::Cfeg => "cfeg",
            SignalId::Gnd => "gnd",
        }
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignalId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SignalId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown signal {s:?}")))
    }
}

/// 24 hourly values of one signal for one scope (a bus, a zone or `grid`).
#[derive(Clone, Debug, PartialEq)]
pub struct SignalVector {
    pub id: SignalId,
    pub scope: String,
    pub values: [f64; HOURS],
}

impl SignalVector {
    pub fn new(id: SignalId, scope: impl Into<String>, values: [f64; HOURS]) -> Result<Self> {
        let scope = scope.into();
        if let Some(h) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("signal {id} ({scope}) has a non-finite value at hour {h}")));
        }
        Ok(Self { id, scope, values })
    }

    /// Values oriented so that larger means "better hour for extra load".
    pub fn load_score(&self) -> [f64; HOURS] {
        let mut s = self.values;
        if self.id.orientation() == Orientation::LoadWhereLow {
            for v in &mut s {
                *v = -*v;
            }
        }
        s
    }
}

/// Generation-weighted carbon intensity per hour in gCO2/kWh.
pub fn avg_carbon_intensity(case: &GridCase, dispatch: &DispatchResult) -> Result<SignalVector> {
    let mut values = [0.0; HOURS];
    for h in 0..HOURS {
        let mut gen = 0.0;
        let mut grams = 0.0;
        for (g, spec) in case.generators.iter().enumerate() {
            gen += dispatch.gen_mw[g][h];
            grams += dispatch.gen_mw[g][h] * case.carbon.intensity(spec.technology);
        }
        if gen <= 0.0 {
            return Err(Error::InvalidScenario { date: dispatch.date, detail: format!("no generation in hour {h}") });
        }
        values[h] = grams / gen;
    }
    SignalVector::new(SignalId::AvgCi, "grid", values)
}

fn intermittent_available(case: &GridCase, scenario: &DayScenario, zone: Option<&str>) -> [f64; HOURS] {
    let mut out = [0.0; HOURS];
    for (g, spec) in case.generators.iter().enumerate() {
        if spec.technology.is_intermittent() && zone.is_none_or(|z| case.generator_zone(g) == Some(z)) {
            for h in 0..HOURS {
                out[h] += scenario.availability[g][h] * spec.p_max;
            }
        }
    }
    out
}

/// Total inelastic demand minus available wind and solar, per hour.
pub fn grid_net_demand(case: &GridCase, scenario: &DayScenario) -> SignalVector {
    let demand = scenario.total_demand();
    let ren = intermittent_available(case, scenario, None);
    let mut values = [0.0; HOURS];
    for h in 0..HOURS {
        values[h] = demand[h] - ren[h];
    }
    SignalVector { id: SignalId::Gnd, scope: "grid".into(), values }
}

/// Which renewable figure net demand subtracts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RenewableBasis {
    /// Forecast availability, known day-ahead.
    #[default]
    Available,
    /// Dispatched output, for retrospective analysis.
    Dispatched,
}

/// Net demand of a solved day: all demand, flexible load included, minus
/// wind and solar.
pub fn dispatch_net_demand(case: &GridCase, dispatch: &DispatchResult, basis: RenewableBasis) -> [f64; HOURS] {
    let demand = dispatch.grid_demand();
    let mut out = demand;
    for (g, spec) in case.generators.iter().enumerate() {
        if spec.technology.is_intermittent() {
            let src = match basis {
                RenewableBasis::Available => &dispatch.available_mw[g],
                RenewableBasis::Dispatched => &dispatch.gen_mw[g],
            };
            for h in 0..HOURS {
                out[h] -= src[h];
            }
        }
    }
    out
}

/// Available wind and solar MW in `zone`, or grid-wide when `zone` is `None`.
pub fn zonal_renewables(case: &GridCase, scenario: &DayScenario, zone: Option<&str>) -> Result<SignalVector> {
    match zone {
        None => SignalVector::new(SignalId::Ws, "grid", intermittent_available(case, scenario, None)),
        Some(z) => {
            if !case.buses.iter().any(|b| b.zone == z) {
                return Err(Error::UnknownZone(z.to_owned()));
            }
            SignalVector::new(SignalId::Zws, z, intermittent_available(case, scenario, Some(z)))
        }
    }
}

pub const DEFAULT_EPSILON_MW: f64 = 1.0;

/// Locational marginal emissions at `bus` for every hour.
pub fn lme_signal(model: &DayModel<'_>, baseline: &DispatchResult, bus: usize) -> Result<SignalVector> {
    let mut values = [0.0; HOURS];
    for (h, v) in values.iter_mut().enumerate() {
        *v = marginal_emissions(model, baseline, bus, h, DEFAULT_EPSILON_MW)?;
    }
    SignalVector::new(SignalId::Lme, model.case().buses[bus].id.clone(), values)
}

pub fn lmp_signal(case: &GridCase, baseline: &DispatchResult, bus: usize) -> SignalVector {
    SignalVector { id: SignalId::Lmp, scope: case.buses[bus].id.clone(), values: baseline.lmp[bus] }
}

/// Stand-in for a marginal-emissions feed: carbon intensity of the unit
/// setting the price at `bus`, or the zone's average intensity in hours
/// without an identifiable marginal unit.
pub fn surrogate_wme(case: &GridCase, baseline: &DispatchResult, bus: usize) -> SignalVector {
    let zone = case.buses[bus].zone.as_str();
    let mut values = [0.0; HOURS];
    for (h, v) in values.iter_mut().enumerate() {
        *v = match marginal_unit(case, baseline, bus, h) {
            Some(g) => case.carbon.intensity(case.generators[g].technology),
            None => {
                let (mut gen, mut grams) = (0.0, 0.0);
                for (g, spec) in case.generators.iter().enumerate() {
                    if case.generator_zone(g) == Some(zone) {
                        gen += baseline.gen_mw[g][h];
                        grams += baseline.gen_mw[g][h] * case.carbon.intensity(spec.technology);
                    }
                }
                if gen > 0.0 {
                    grams / gen
                } else {
                    0.0
                }
            }
        };
    }
    SignalVector { id: SignalId::Wme, scope: case.buses[bus].id.clone(), values }
}

/// Stand-in for a contracted clean-energy feed: hourly dispatched output of
/// the contracted renewable units.
pub fn surrogate_cfeg(baseline: &DispatchResult, contracted: &[usize], scope: &str) -> SignalVector {
    let mut values = [0.0; HOURS];
    for &g in contracted {
        for h in 0..HOURS {
            values[h] += baseline.gen_mw[g][h];
        }
    }
    SignalVector { id: SignalId::Cfeg, scope: scope.to_owned(), values }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmpStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl LmpStats {
    pub fn of(values: &[f64; HOURS]) -> Self {
        let mut sorted = *values;
        sorted.sort_by(f64::total_cmp);
        let mid = HOURS / 2;
        Self {
            min: sorted[0],
            max: sorted[HOURS - 1],
            mean: values.iter().sum::<f64>() / HOURS as f64,
            median: 0.5 * (sorted[mid - 1] + sorted[mid]),
        }
    }
}

/// Daily inputs of the policy and the feature study.
#[derive(Clone, Debug, PartialEq)]
pub struct DayFeatures {
    pub date: NaiveDate,
    /// Baseline LMP statistics per flexible bus, in flexible-load order.
    pub lmp: Vec<(String, LmpStats)>,
    pub total_demand_mwh: f64,
    pub gnd: [f64; HOURS],
    pub gnd_total_mwh: f64,
    pub avg_ci: f64,
    pub renewable_mwh: f64,
    /// Dispatched wind and solar per zone, zones sorted by name.
    pub zonal_renewable_mwh: Vec<(String, f64)>,
}

impl DayFeatures {
    pub fn min_lmp(&self, bus: &str) -> Option<f64> {
        self.lmp.iter().find(|(b, _)| b == bus).map(|(_, s)| s.min)
    }

    /// Flat numeric vector with matching names, for the feature study.
    pub fn to_vector(&self) -> (Vec<String>, Vec<f64>) {
        let mut names = Vec::new();
        let mut values = Vec::new();
        names.push("gnd_total".into());
        values.push(self.gnd_total_mwh);
        names.push("total_demand".into());
        values.push(self.total_demand_mwh);
        for (bus, s) in &self.lmp {
            for (k, v) in [("min", s.min), ("max", s.max)] {
                names.push(format!("{k}_lmp_{bus}"));
                values.push(v);
            }
        }
        names.push("avg_ci".into());
        values.push(self.avg_ci);
        names.push("renewable_total".into());
        values.push(self.renewable_mwh);
        for (zone, v) in &self.zonal_renewable_mwh {
            names.push(format!("renewable_{zone}"));
            values.push(*v);
        }
        (names, values)
    }
}

/// Assembles the daily features from the baseline run.
pub fn day_features(case: &GridCase, scenario: &DayScenario, baseline: &DispatchResult, flex_buses: &[String]) -> Result<DayFeatures> {
    let mut lmp = Vec::with_capacity(flex_buses.len());
    for bus in flex_buses {
        let b = case.bus_index(bus).ok_or_else(|| Error::UnknownBus(bus.clone()))?;
        lmp.push((bus.clone(), LmpStats::of(&baseline.lmp[b])));
    }
    let gnd = grid_net_demand(case, scenario).values;
    let total_gen: f64 = baseline.total_generation().iter().sum();
    if total_gen <= 0.0 {
        return Err(Error::InvalidScenario { date: scenario.date, detail: "no generation".into() });
    }
    let mut zonal = Vec::new();
    for zone in case.zones() {
        let mut v = 0.0;
        for (g, spec) in case.generators.iter().enumerate() {
            if spec.technology.is_intermittent() && case.generator_zone(g) == Some(zone.as_str()) {
                v += baseline.gen_mw[g].iter().sum::<f64>();
            }
        }
        zonal.push((zone, v));
    }
    Ok(DayFeatures {
        date: scenario.date,
        lmp,
        total_demand_mwh: baseline.grid_demand().iter().sum(),
        gnd,
        gnd_total_mwh: gnd.iter().sum(),
        avg_ci: baseline.emissions_t * 1000.0 / total_gen,
        renewable_mwh: baseline.renewable_generation(case).iter().sum(),
        zonal_renewable_mwh: zonal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_table() {
        use Orientation::*;
        let expect = [
            (SignalId::AvgCi, LoadWhereLow),
            (SignalId::Lmp, LoadWhereLow),
            (SignalId::Lme, LoadWhereLow),
            (SignalId::Wme, LoadWhereLow),
            (SignalId::Gnd, LoadWhereLow),
            (SignalId::Ws, LoadWhereHigh),
            (SignalId::Zws, LoadWhereHigh),
            (SignalId::Cfeg, LoadWhereHigh),
        ];
        assert_eq!(expect.len(), SignalId::ALL.len());
        for (id, o) in expect {
            assert_eq!(id.orientation(), o, "{id}");
            assert_eq!(id.name().parse::<SignalId>().unwrap(), id);
        }
    }

    #[test]
    fn lmp_stats_examples() {
        let s = LmpStats::of(&[25.0; HOURS]);
        assert_eq!((s.min, s.max, s.median, s.mean), (25.0, 25.0, 25.0, 25.0));
        let mut v = [0.0; HOURS];
        for (h, x) in v.iter_mut().enumerate() {
            *x = h as f64;
        }
        let s = LmpStats::of(&v);
        assert_eq!((s.min, s.max, s.median), (0.0, 23.0, 11.5));
    }

    #[test]
    fn non_finite_signal_rejected() {
        let mut v = [1.0; HOURS];
        v[5] = f64::NAN;
        assert!(SignalVector::new(SignalId::Lmp, "x", v).is_err());
    }
}
