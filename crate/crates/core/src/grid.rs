//! Static grid description and the flexible-load schedule type.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ShapeError;

pub const HOURS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technology {
    Wind,
    Solar,
    Nuclear,
    Coal,
    GasCc,
    GasCt,
    GasSt,
    GasIc,
    Hydro,
    Biomass,
    Battery,
}

impl Technology {
    pub const ALL: [Technology; 11] = [
        Technology::Wind,
        Technology::Solar,
        Technology::Nuclear,
        Technology::Coal,
        Technology::GasCc,
        Technology::GasCt,
        Technology::GasSt,
        Technology::GasIc,
        Technology::Hydro,
        Technology::Biomass,
        Technology::Battery,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Technology::Wind => "wind",
            Technology::Solar => "solar",
            Technology::Nuclear => "nuclear",
            Technology::Coal => "coal",
            Technology::GasCc => "gas_cc",
            Technology::GasCt => "gas_ct",
            Technology::GasSt => "gas_st",
            Technology::GasIc => "gas_ic",
            Technology::Hydro => "hydro",
            Technology::Biomass => "biomass",
            Technology::Battery => "battery",
        }
    }

    /// Wind and solar: the units subtracted from demand to form grid net demand.
    pub fn is_intermittent(self) -> bool {
        matches!(self, Technology::Wind | Technology::Solar)
    }

    pub fn is_gas(self) -> bool {
        matches!(self, Technology::GasCc | Technology::GasCt | Technology::GasSt | Technology::GasIc)
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Carbon intensity per technology in gCO2/kWh. Total over [`Technology`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Technology, f64>", into = "BTreeMap<Technology, f64>")]
pub struct CarbonTable([f64; 11]);

impl Default for CarbonTable {
    fn default() -> Self {
        let mut t = [0.0; 11];
        for tech in Technology::ALL {
            t[tech.index()] = match tech {
                Technology::Wind => 11.0,
                Technology::Solar => 45.0,
                Technology::Nuclear => 12.0,
                Technology::Coal => 820.0,
                Technology::GasCc | Technology::GasCt | Technology::GasSt | Technology::GasIc => 490.0,
                Technology::Biomass => 230.0,
                Technology::Hydro => 24.0,
                // Discharge only; charging energy is outside the accounting.
                Technology::Battery => 0.0,
            };
        }
        CarbonTable(t)
    }
}

impl CarbonTable {
    pub fn intensity(&self, tech: Technology) -> f64 {
        self.0[tech.index()]
    }

    pub fn set(&mut self, tech: Technology, g_per_kwh: f64) {
        self.0[tech.index()] = g_per_kwh;
    }

    /// Tonnes of CO2 per MWh.
    pub fn tonnes_per_mwh(&self, tech: Technology) -> f64 {
        self.intensity(tech) / 1000.0
    }
}

impl TryFrom<BTreeMap<Technology, f64>> for CarbonTable {
    type Error = String;

    fn try_from(map: BTreeMap<Technology, f64>) -> Result<Self, Self::Error> {
        let mut t = [0.0; 11];
        for tech in Technology::ALL {
            let v = *map.get(&tech).ok_or_else(|| format!("carbon table is missing {tech}"))?;
            if !v.is_finite() || v < 0.0 {
                return Err(format!("carbon intensity of {tech} must be finite and >= 0, got {v}"));
            }
            t[tech.index()] = v;
        }
        Ok(CarbonTable(t))
    }
}

impl From<CarbonTable> for BTreeMap<Technology, f64> {
    fn from(t: CarbonTable) -> Self {
        Technology::ALL.iter().map(|&k| (k, t.0[k.index()])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: String,
    pub zone: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Per unit on `GridCase::base_mva`.
    pub susceptance: f64,
    /// MW, both directions.
    pub flow_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub id: String,
    pub bus: String,
    pub technology: Technology,
    pub p_min: f64,
    pub p_max: f64,
    /// $/MWh; renewables may bid zero or below.
    pub bid: f64,
    /// Daily energy cap in MWh for storage and hydro; `None` is unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daily_energy_budget: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub carbon: CarbonTable,
    pub slack_bus: String,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
}

fn default_base_mva() -> f64 {
    100.0
}

/// One broken invariant of a [`GridCase`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

impl GridCase {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn zones(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.buses.iter().map(|b| b.zone.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn zone_of_bus(&self, bus: usize) -> &str {
        &self.buses[bus].zone
    }

    pub fn generator_zone(&self, g: usize) -> Option<&str> {
        self.bus_index(&self.generators[g].bus).map(|b| self.zone_of_bus(b))
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_case(self)
    }
}

/// Every invariant violation of `case`; empty iff the case is well formed.
pub fn validate_case(case: &GridCase) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: String, rule: &str| out.push(Violation { entity, rule: rule.to_owned() });

    let mut seen = BTreeSet::new();
    for b in &case.buses {
        if !seen.insert(b.id.as_str()) {
            push(format!("bus {}", b.id), "duplicate bus id");
        }
        if b.zone.is_empty() {
            push(format!("bus {}", b.id), "bus has no zone");
        }
    }
    let bus_set: BTreeSet<&str> = case.buses.iter().map(|b| b.id.as_str()).collect();

    let mut line_ids = BTreeSet::new();
    for l in &case.lines {
        let e = format!("line {}", l.id);
        if !line_ids.insert(l.id.as_str()) {
            push(e.clone(), "duplicate line id");
        }
        if !bus_set.contains(l.from_bus.as_str()) {
            push(e.clone(), "from_bus does not exist");
        }
        if !bus_set.contains(l.to_bus.as_str()) {
            push(e.clone(), "to_bus does not exist");
        }
        if l.from_bus == l.to_bus {
            push(e.clone(), "from_bus equals to_bus");
        }
        if !(l.susceptance.is_finite() && l.susceptance > 0.0) {
            push(e.clone(), "susceptance must be positive");
        }
        if !(l.flow_limit.is_finite() && l.flow_limit > 0.0) {
            push(e, "flow_limit must be positive");
        }
    }

    let mut gen_ids = BTreeSet::new();
    for g in &case.generators {
        let e = format!("generator {}", g.id);
        if !gen_ids.insert(g.id.as_str()) {
            push(e.clone(), "duplicate generator id");
        }
        if !bus_set.contains(g.bus.as_str()) {
            push(e.clone(), "bus does not exist");
        }
        if !(g.p_min.is_finite() && g.p_max.is_finite() && 0.0 <= g.p_min && g.p_min <= g.p_max) {
            push(e.clone(), "requires 0 <= p_min <= p_max");
        }
        if !g.bid.is_finite() {
            push(e.clone(), "bid must be finite");
        }
        if let Some(budget) = g.daily_energy_budget {
            if !(budget.is_finite() && budget >= 0.0) {
                push(e, "daily energy budget must be >= 0");
            }
        }
    }

    if !bus_set.contains(case.slack_bus.as_str()) {
        push(format!("slack bus {}", case.slack_bus), "slack bus does not exist");
    }
    if !(case.base_mva.is_finite() && case.base_mva > 0.0) {
        push("case".to_owned(), "base_mva must be positive");
    }

    if !case.buses.is_empty() {
        let idx: BTreeMap<&str, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); case.buses.len()];
        for l in &case.lines {
            if let (Some(&a), Some(&b)) = (idx.get(l.from_bus.as_str()), idx.get(l.to_bus.as_str())) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut reached = vec![false; case.buses.len()];
        let mut queue = VecDeque::from([0usize]);
        reached[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !reached[v] {
                    reached[v] = true;
                    queue.push_back(v);
                }
            }
        }
        for (i, r) in reached.iter().enumerate() {
            if !r {
                push(format!("bus {}", case.buses[i].id), "not connected to the network");
            }
        }
    }
    out
}

/// Three-level flexible load at one bus: `hours_up` hours at `base + delta`,
/// `hours_down` at `base - delta`, the rest at `base`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlexLoadSpec {
    pub bus: String,
    #[serde(default = "default_base")]
    pub base: i64,
    #[serde(default = "default_delta")]
    pub delta: i64,
    #[serde(default = "default_nine")]
    pub hours_up: usize,
    #[serde(default = "default_nine")]
    pub hours_down: usize,
    #[serde(default = "default_six")]
    pub hours_flat: usize,
}

fn default_base() -> i64 {
    400
}
fn default_delta() -> i64 {
    80
}
fn default_nine() -> usize {
    9
}
fn default_six() -> usize {
    6
}

impl FlexLoadSpec {
    pub fn new(bus: impl Into<String>) -> Self {
        Self { bus: bus.into(), base: 400, delta: 80, hours_up: 9, hours_down: 9, hours_flat: 6 }
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        if self.hours_up != self.hours_down || self.hours_up + self.hours_down + self.hours_flat != HOURS {
            return Err(ShapeError::Spec(format!(
                "{}: need hours_up = hours_down and a 24-hour total, got {}/{}/{}",
                self.bus, self.hours_up, self.hours_down, self.hours_flat
            )));
        }
        if self.delta < 0 || self.base - self.delta <= 0 {
            return Err(ShapeError::Spec(format!("{}: need 0 <= delta < base", self.bus)));
        }
        Ok(())
    }

    pub fn level_mw(&self, level: Level) -> i64 {
        match level {
            Level::Down => self.base - self.delta,
            Level::Flat => self.base,
            Level::Up => self.base + self.delta,
        }
    }

    pub fn daily_budget_mwh(&self) -> i64 {
        self.base * HOURS as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Down,
    Flat,
    Up,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeSchedule {
    pub spec: FlexLoadSpec,
    pub mw: [i64; HOURS],
}

impl NodeSchedule {
    pub fn level(&self, hour: usize) -> Level {
        let v = self.mw[hour];
        if v > self.spec.base {
            Level::Up
        } else if v < self.spec.base {
            Level::Down
        } else {
            Level::Flat
        }
    }

    pub fn energy_mwh(&self) -> i64 {
        self.mw.iter().sum()
    }
}

/// Hourly MW schedules of one or more flexible loads. Construction enforces
/// the three-level values and the joint daily energy budget.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LoadShape {
    nodes: Vec<NodeSchedule>,
}

impl LoadShape {
    pub fn new(nodes: Vec<NodeSchedule>) -> Result<Self, ShapeError> {
        if nodes.is_empty() {
            return Err(ShapeError::Malformed("a load shape needs at least one node".into()));
        }
        let mut budget = 0i64;
        for n in &nodes {
            n.spec.validate()?;
            for (h, &v) in n.mw.iter().enumerate() {
                let s = &n.spec;
                if v != s.base && v != s.base + s.delta && v != s.base - s.delta {
                    return Err(ShapeError::Level { bus: s.bus.clone(), hour: h, mw: v });
                }
            }
            budget += n.spec.daily_budget_mwh();
        }
        let total: i64 = nodes.iter().map(NodeSchedule::energy_mwh).sum();
        if total != budget {
            return Err(ShapeError::Budget { expected: budget, actual: total });
        }
        if let [only] = nodes.as_slice() {
            let ups = (0..HOURS).filter(|&h| only.level(h) == Level::Up).count();
            let downs = (0..HOURS).filter(|&h| only.level(h) == Level::Down).count();
            // The flat baseline is the one admissible single-node shape
            // without the up/down structure.
            let flat = ups == 0 && downs == 0;
            if only.spec.delta > 0 && !flat && (ups != only.spec.hours_up || downs != only.spec.hours_down) {
                return Err(ShapeError::Structure { bus: only.spec.bus.clone(), ups, downs });
            }
        }
        Ok(Self { nodes })
    }

    /// Builds from unchecked vectors; wrong lengths are structural errors.
    pub fn from_vecs(specs: &[FlexLoadSpec], values: &[Vec<i64>]) -> Result<Self, ShapeError> {
        if specs.len() != values.len() {
            return Err(ShapeError::Malformed(format!("{} specs but {} schedules", specs.len(), values.len())));
        }
        let mut nodes = Vec::with_capacity(specs.len());
        for (s, v) in specs.iter().zip(values) {
            let mw: [i64; HOURS] = v
                .as_slice()
                .try_into()
                .map_err(|_| ShapeError::Malformed(format!("{}: expected 24 hourly values, got {}", s.bus, v.len())))?;
            nodes.push(NodeSchedule { spec: s.clone(), mw });
        }
        Self::new(nodes)
    }

    pub fn flat(specs: &[FlexLoadSpec]) -> Result<Self, ShapeError> {
        Self::new(specs.iter().map(|s| NodeSchedule { spec: s.clone(), mw: [s.base; HOURS] }).collect())
    }

    /// Ranks slots `(node, hour)` by `score` (higher is better for added
    /// load); the `n_up` best get `+delta`, the `n_down` worst `-delta`.
    /// Ties go to the earlier hour, then the lower node index.
    pub fn from_ranking(specs: &[FlexLoadSpec], score: &[[f64; HOURS]], n_up: usize, n_down: usize) -> Result<Self, ShapeError> {
        let levels = rank_levels(score, n_up, n_down)?;
        let nodes = specs
            .iter()
            .zip(levels)
            .map(|(s, lv)| {
                let mut mw = [0i64; HOURS];
                for h in 0..HOURS {
                    mw[h] = s.level_mw(lv[h]);
                }
                NodeSchedule { spec: s.clone(), mw }
            })
            .collect();
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[NodeSchedule] {
        &self.nodes
    }

    pub fn node(&self, bus: &str) -> Option<&NodeSchedule> {
        self.nodes.iter().find(|n| n.spec.bus == bus)
    }

    pub fn specs(&self) -> Vec<FlexLoadSpec> {
        self.nodes.iter().map(|n| n.spec.clone()).collect()
    }
}

/// Stable slot ranking shared by signal-following strategies and the
/// rounding of continuous benchmark schedules.
pub fn rank_levels(score: &[[f64; HOURS]], n_up: usize, n_down: usize) -> Result<Vec<[Level; HOURS]>, ShapeError> {
    let slots = score.len() * HOURS;
    if n_up + n_down > slots {
        return Err(ShapeError::Malformed(format!("{n_up} up and {n_down} down slots exceed {slots}")));
    }
    let mut order: Vec<(usize, usize)> = (0..HOURS).flat_map(|h| (0..score.len()).map(move |n| (n, h))).collect();
    for &(n, h) in &order {
        if !score[n][h].is_finite() {
            return Err(ShapeError::Malformed(format!("non-finite score at node {n}, hour {h}")));
        }
    }
    // Descending score; the sort is stable so ties stay in (hour, node) order.
    // Nodes sharing a signal then fill whole hours, as they would alone.
    order.sort_by(|a, b| score[b.0][b.1].total_cmp(&score[a.0][a.1]));
    let mut levels = vec![[Level::Flat; HOURS]; score.len()];
    for &(n, h) in order.iter().take(n_up) {
        levels[n][h] = Level::Up;
    }
    for &(n, h) in order.iter().skip(slots - n_down) {
        levels[n][h] = Level::Down;
    }
    Ok(levels)
}

/// Exact daily energy of all schedules in MWh.
pub fn total_shape_energy(shape: &LoadShape) -> i64 {
    shape.nodes.iter().map(NodeSchedule::energy_mwh).sum()
}
