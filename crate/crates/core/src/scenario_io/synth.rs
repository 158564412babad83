//! Deterministic synthetic year on a two-zone grid.
//!
//! The NORTH zone is wind-rich and lightly loaded; EAST carries most of the
//! demand on nuclear, coal and gas. A single tie between them binds whenever
//! NORTH renewables exceed local load plus the tie rating, which is what
//! separates prices at the two flexible sites and produces curtailment.

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ScenarioBundle, Season};
use crate::dispatch::DayScenario;
use crate::error::{Error, Result};
use crate::grid::{BusSpec, CarbonTable, FlexLoadSpec, GeneratorSpec, GridCase, LineSpec, Technology, HOURS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneParams {
    /// Installed wind MW.
    pub wind_mw: f64,
    pub solar_mw: f64,
    pub coal_mw: f64,
    pub gas_mw: f64,
    /// Mean winter inelastic demand in MW.
    pub demand_mw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub days: usize,
    pub start: NaiveDate,
    pub north: ZoneParams,
    pub east: ZoneParams,
    /// Thermal rating of the inter-zone tie in MW.
    pub tie_limit_mw: f64,
    /// Mean summer demand over mean winter demand.
    pub summer_winter_ratio: f64,
    /// Multiplier on wind availability in summer.
    pub summer_renewable_derate: f64,
    /// Fraction of renewable units that bid below zero.
    pub negative_bid_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            days: 365,
            start: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            north: ZoneParams { wind_mw: 6000.0, solar_mw: 1500.0, coal_mw: 2000.0, gas_mw: 1600.0, demand_mw: 900.0 },
            east: ZoneParams { wind_mw: 800.0, solar_mw: 600.0, coal_mw: 4400.0, gas_mw: 8000.0, demand_mw: 5100.0 },
            tie_limit_mw: 1200.0,
            summer_winter_ratio: 2.0,
            summer_renewable_derate: 0.9,
            negative_bid_fraction: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("summer_winter_ratio", self.summer_winter_ratio),
            ("summer_renewable_derate", self.summer_renewable_derate),
            ("tie_limit_mw", self.tie_limit_mw),
            ("north.demand_mw", self.north.demand_mw),
            ("east.demand_mw", self.east.demand_mw),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for z in [&self.north, &self.east] {
            for v in [z.wind_mw, z.solar_mw, z.coal_mw, z.gas_mw] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Config(format!("zone capacities must be >= 0, got {v}")));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.negative_bid_fraction) {
            return Err(Error::Config("negative_bid_fraction must lie in [0, 1]".into()));
        }
        if self.days == 0 {
            return Err(Error::Config("days must be positive".into()));
        }
        Ok(())
    }
}

pub const TESLA: &str = "tesla";
pub const TYLERGND: &str = "tylergnd";

/// Summer weight in [0, 1]: a clipped sinusoid peaking in late July, with
/// transitions of a few weeks in spring and autumn.
pub fn summer_weight(date: NaiveDate) -> f64 {
    let doy = date.ordinal0() as f64;
    let s = (2.0 * std::f64::consts::PI * (doy - 110.0) / 365.0).sin();
    (0.5 + 2.5 * s).clamp(0.0, 1.0)
}

fn bus(id: &str, zone: &str) -> BusSpec {
    BusSpec { id: id.into(), zone: zone.into() }
}

fn line(id: &str, from: &str, to: &str, susceptance: f64, limit: f64) -> LineSpec {
    LineSpec { id: id.into(), from_bus: from.into(), to_bus: to.into(), susceptance, flow_limit: limit }
}

struct Gens<'r> {
    list: Vec<GeneratorSpec>,
    rng: &'r mut ChaCha8Rng,
    renewables: usize,
    negative_fraction: f64,
}

impl Gens<'_> {
    fn add(&mut self, id: String, bus: &str, technology: Technology, p_max: f64, bid: f64) -> &mut GeneratorSpec {
        self.list.push(GeneratorSpec {
            id,
            bus: bus.into(),
            technology,
            p_min: 0.0,
            p_max,
            bid,
            daily_energy_budget: None,
        });
        self.list.last_mut().unwrap()
    }

    /// Renewables bid near zero; a small per-unit offset fixes the merit order.
    fn renewable(&mut self, id: String, bus: &str, technology: Technology, p_max: f64) {
        if p_max <= 0.0 {
            return;
        }
        let offset = 0.001 * self.renewables as f64;
        self.renewables += 1;
        let bid = if self.rng.random_bool(self.negative_fraction) { -5.0 + offset } else { offset };
        self.add(id, bus, technology, p_max, bid);
    }

    fn thermal(&mut self, id: String, bus: &str, technology: Technology, p_max: f64, bids: (f64, f64)) {
        if p_max <= 0.0 {
            return;
        }
        let bid = (self.rng.random_range(bids.0..bids.1) * 100.0).round() / 100.0;
        self.add(id, bus, technology, p_max, bid);
    }
}

fn split(total: f64, n: usize) -> Vec<f64> {
    vec![total / n as f64; n]
}

/// The static two-zone grid and its flexible sites.
pub fn synthetic_case(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (GridCase, Vec<FlexLoadSpec>, Vec<String>) {
    let buses = vec![
        bus(TESLA, "NORTH"),
        bus("north_wind", "NORTH"),
        bus("north_hub", "NORTH"),
        bus(TYLERGND, "EAST"),
        bus("east_coal", "EAST"),
        bus("east_load", "EAST"),
    ];
    let big = 20_000.0;
    let lines = vec![
        line("tesla_wind", TESLA, "north_wind", 20.0, big),
        line("wind_hub", "north_wind", "north_hub", 20.0, big),
        line("tesla_hub", TESLA, "north_hub", 20.0, big),
        line("tie", "north_hub", "east_load", 10.0, cfg.tie_limit_mw),
        line("tyler_coal", TYLERGND, "east_coal", 20.0, big),
        line("coal_load", "east_coal", "east_load", 20.0, big),
        line("tyler_load", TYLERGND, "east_load", 20.0, big),
    ];

    let mut g = Gens { list: Vec::new(), rng, renewables: 0, negative_fraction: cfg.negative_bid_fraction };
    for (i, mw) in split(cfg.north.wind_mw, 4).into_iter().enumerate() {
        g.renewable(format!("north_wind_{}", i + 1), "north_wind", Technology::Wind, mw);
    }
    g.renewable("tesla_solar".into(), TESLA, Technology::Solar, cfg.north.solar_mw);
    g.renewable("east_wind".into(), "east_coal", Technology::Wind, cfg.east.wind_mw);
    g.renewable("east_solar".into(), "east_load", Technology::Solar, cfg.east.solar_mw);

    let nuclear = g.add("east_nuclear".into(), "east_coal", Technology::Nuclear, 2400.0, 2.0);
    nuclear.p_min = 2400.0;
    let hydro = g.add("east_hydro".into(), TYLERGND, Technology::Hydro, 400.0, 1.0);
    hydro.daily_energy_budget = Some(3000.0);
    let battery = g.add("north_battery".into(), TESLA, Technology::Battery, 300.0, 1.5);
    battery.daily_energy_budget = Some(1200.0);
    g.thermal("north_biomass".into(), "north_hub", Technology::Biomass, 200.0, (15.0, 18.0));

    let coal_units = if cfg.east.coal_mw > 0.0 { 4 } else { 0 };
    for (i, mw) in split(cfg.east.coal_mw, coal_units.max(1)).into_iter().enumerate().take(coal_units) {
        let bus = if i == 0 { TYLERGND } else { "east_coal" };
        g.thermal(format!("east_coal_{}", i + 1), bus, Technology::Coal, mw, (12.0, 22.0));
    }
    if cfg.north.coal_mw > 0.0 {
        g.thermal("north_coal".into(), "north_hub", Technology::Coal, cfg.north.coal_mw, (12.0, 22.0));
    }
    // EAST gas fleet: 5/8 combined cycle, the rest steam, CT and IC units.
    let eg = cfg.east.gas_mw;
    g.thermal("east_gas_cc_1".into(), "east_load", Technology::GasCc, eg * 5.0 / 16.0, (20.0, 28.0));
    g.thermal("east_gas_cc_2".into(), "east_load", Technology::GasCc, eg * 5.0 / 16.0, (20.0, 28.0));
    g.thermal("east_gas_st".into(), "east_load", Technology::GasSt, eg * 3.0 / 16.0, (30.0, 36.0));
    g.thermal("east_gas_ct".into(), "east_load", Technology::GasCt, eg * 2.0 / 16.0, (38.0, 45.0));
    g.thermal("east_gas_ic".into(), TYLERGND, Technology::GasIc, eg / 16.0, (40.0, 45.0));
    let ng = cfg.north.gas_mw;
    g.thermal("north_gas_cc".into(), "north_hub", Technology::GasCc, ng * 5.0 / 8.0, (20.0, 28.0));
    g.thermal("north_gas_ct".into(), TESLA, Technology::GasCt, ng * 3.0 / 8.0, (38.0, 45.0));

    let list = g.list;
    // Contracted clean energy: the first NORTH wind farm and the NORTH solar.
    let contracted = list
        .iter()
        .filter(|s| s.id == "north_wind_1" || s.id == "tesla_solar")
        .map(|s| s.id.clone())
        .collect();
    let case = GridCase {
        buses,
        lines,
        generators: list,
        carbon: CarbonTable::default(),
        slack_bus: "east_load".into(),
        base_mva: 100.0,
    };
    let flex = vec![FlexLoadSpec::new(TESLA), FlexLoadSpec::new(TYLERGND)];
    (case, flex, contracted)
}

/// Hourly demand shape with unit mean: a morning and evening peak in winter,
/// an afternoon peak in summer.
fn demand_profile(h: usize, w: f64) -> f64 {
    let t = h as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let winter = 1.0 + 0.08 * (two_pi * (t - 4.0) / 12.0).sin() - 0.08 * (two_pi * (t - 10.0) / 24.0).cos();
    let summer = 1.0 + 0.22 * (two_pi * (t - 10.0) / 24.0).sin();
    (1.0 - w) * winter + w * summer
}

fn solar_profile(h: usize, w: f64) -> f64 {
    let (rise, set) = (7.0 - w, 18.0 + w);
    let t = h as f64 + 0.5;
    if t <= rise || t >= set {
        0.0
    } else {
        (std::f64::consts::PI * (t - rise) / (set - rise)).sin()
    }
}

/// Generates the static case plus `cfg.days` consecutive days.
pub fn generate_synthetic_year(cfg: &SynthConfig) -> Result<ScenarioBundle> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (case, flex_sites, cfeg_units) = synthetic_case(cfg, &mut rng);

    let bus_share: Vec<(usize, f64, bool)> = vec![
        (case.bus_index("north_hub").unwrap(), 0.8, true),
        (case.bus_index(TESLA).unwrap(), 0.2, true),
        (case.bus_index("east_load").unwrap(), 0.8, false),
        (case.bus_index("east_coal").unwrap(), 0.12, false),
        (case.bus_index(TYLERGND).unwrap(), 0.08, false),
    ];
    let day_noise = Normal::new(0.0, 0.04).unwrap();
    let hour_noise = Normal::new(0.0, 0.01).unwrap();
    let wind_level = Beta::new(2.0, 2.2).unwrap();
    let cloud = Beta::new(5.0, 1.5).unwrap();

    let mut days = Vec::with_capacity(cfg.days);
    let mut labels = Vec::with_capacity(cfg.days);
    for d in 0..cfg.days {
        let date = cfg.start + Duration::days(d as i64);
        let w = summer_weight(date);
        let scale = 1.0 + (cfg.summer_winter_ratio - 1.0) * w;
        let level = 1.0 + day_noise.sample(&mut rng);

        let mut demand = vec![[0.0; HOURS]; case.buses.len()];
        for h in 0..HOURS {
            let base = demand_profile(h, w) * scale * level * (1.0 + hour_noise.sample(&mut rng));
            for &(b, share, north) in &bus_share {
                let zone = if north { cfg.north.demand_mw } else { cfg.east.demand_mw };
                demand[b][h] = (zone * share * base * 10.0).round() / 10.0;
            }
        }

        let derate = 1.0 - (1.0 - cfg.summer_renewable_derate) * w;
        let day_wind: f64 = wind_level.sample(&mut rng);
        let trend: f64 = rng.random_range(-0.25..0.25);
        let sky: f64 = cloud.sample(&mut rng);
        let mut availability = vec![[1.0; HOURS]; case.generators.len()];
        for (g, spec) in case.generators.iter().enumerate() {
            match spec.technology {
                Technology::Wind => {
                    let farm: f64 = rng.random_range(0.85..1.15);
                    for h in 0..HOURS {
                        let t = h as f64;
                        let diurnal = 0.12 * (2.0 * std::f64::consts::PI * (t - 3.0) / 24.0).cos();
                        let drift = trend * (t - 11.5) / 11.5;
                        let jitter: f64 = rng.random_range(-0.05..0.05);
                        let v = (day_wind * farm + diurnal + drift + jitter) * derate;
                        availability[g][h] = (v.clamp(0.0, 1.0) * 1000.0).round() / 1000.0;
                    }
                }
                Technology::Solar => {
                    for h in 0..HOURS {
                        let v = solar_profile(h, w) * sky * (0.85 + 0.15 * w);
                        availability[g][h] = (v.clamp(0.0, 1.0) * 1000.0).round() / 1000.0;
                    }
                }
                _ => {}
            }
        }
        days.push(DayScenario { date, demand, availability });
        let season = if w >= 0.5 { Season::Summer } else { Season::Winter };
        labels.push((date, season));
    }

    let bundle = ScenarioBundle { case, flex_sites, cfeg_units, days, signals: Vec::new(), labels };
    bundle.check_adequacy()?;
    Ok(bundle)
}
