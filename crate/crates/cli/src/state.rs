//! What `simulate` leaves behind for `tune`, `features` and `report`.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use shapelab_core::analysis::ImpactRecord;
use shapelab_core::experiment::{group_label, ExperimentConfig, YearOutcome};
use shapelab_core::policy::{Availability, DayRecord, Regime, RegimeModel};
use shapelab_core::signals::SignalId;
use shapelab_core::strategies::StrategyId;
use shapelab_core::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const STATE_FILE: &str = "run.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunState {
    pub format_version: u32,
    pub seed: u64,
    pub sites: Vec<String>,
    pub groups: Vec<Vec<String>>,
    pub strategies: Vec<StrategyId>,
    pub feature_names: Vec<String>,
    pub regimes: Option<RegimeModel>,
    pub days: Vec<DayState>,
    pub failures: Vec<(NaiveDate, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DayState {
    pub date: NaiveDate,
    pub regime: Option<Regime>,
    pub demand_mwh: f64,
    pub min_lmp: Vec<(String, f64)>,
    pub avail: Vec<(String, Availability)>,
    pub features: Vec<f64>,
    pub runs: Vec<RunDelta>,
}

/// Counterfactual minus baseline, except `co2_t` which is emissions saved.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunDelta {
    pub group: usize,
    pub strategy: StrategyId,
    pub co2_t: f64,
    pub cost: f64,
    pub payment: f64,
    pub avg_price: f64,
}

impl RunState {
    pub fn from_year(year: &YearOutcome, cfg: &ExperimentConfig, sites: Vec<String>, regimes: Option<RegimeModel>, seed: u64) -> Self {
        let feature_names = year.days.first().map(|d| d.features.to_vector().0).unwrap_or_default();
        let days = year
            .days
            .iter()
            .map(|d| {
                let b = &d.baseline;
                let mut runs: Vec<RunDelta> = d
                    .runs
                    .iter()
                    .map(|r| RunDelta {
                        group: r.group,
                        strategy: r.strategy,
                        co2_t: b.emissions_t - r.emissions_t,
                        cost: r.total_cost - b.total_cost,
                        payment: r.load_payment - b.load_payment,
                        avg_price: r.avg_price - b.average_price(),
                    })
                    .collect();
                runs.sort_by_key(|r| (r.group, r.strategy.name()));
                DayState {
                    date: d.date,
                    regime: regimes.as_ref().map(|m| m.classify(&d.features.gnd)),
                    demand_mwh: d.features.total_demand_mwh,
                    min_lmp: d.features.lmp.iter().map(|(bus, s)| (bus.clone(), s.min)).collect(),
                    avail: sites
                        .iter()
                        .map(|s| {
                            let wme = d.signals.iter().any(|v| v.id == SignalId::Wme && &v.scope == s);
                            (s.clone(), Availability { renewables: d.has_renewables(s), wme })
                        })
                        .collect(),
                    features: d.features.to_vector().1,
                    runs,
                }
            })
            .collect();
        RunState {
            format_version: FORMAT_VERSION,
            seed,
            sites,
            groups: cfg.groups.clone(),
            strategies: cfg.strategies.clone(),
            feature_names,
            regimes,
            days,
            failures: year.failures.iter().map(|(d, e)| (*d, e.to_string())).collect(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(STATE_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("run state: {e}")))?;
        fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(STATE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("{} (run `simulate` first)", path.display()), e))?;
        let state: RunState = serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), 0, None, e.to_string()))?;
        if state.format_version != FORMAT_VERSION {
            return Err(Error::format(
                path.display().to_string(),
                0,
                Some("format_version"),
                format!("expected {FORMAT_VERSION}, found {}", state.format_version),
            ));
        }
        Ok(state)
    }

    pub fn group_labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| group_label(g)).collect()
    }

    /// Index of the group whose sites are exactly `nodes`.
    pub fn group_index(&self, nodes: &[String]) -> Result<usize> {
        self.groups
            .iter()
            .position(|g| g.as_slice() == nodes)
            .ok_or_else(|| Error::Config(format!("the run has no node group {}", nodes.join(","))))
    }

    /// Tuner input for one group, read at the group's first site.
    pub fn day_records(&self, group: usize) -> Result<Vec<DayRecord>> {
        let lead = &self.groups[group][0];
        self.days
            .iter()
            .map(|d| {
                let regime = d.regime.ok_or_else(|| Error::Config("the run has no regime model; simulate at least 4 days".into()))?;
                Ok(DayRecord {
                    date: d.date,
                    regime,
                    min_lmp: lookup(&d.min_lmp, lead)?,
                    avail: lookup(&d.avail, lead)?,
                    savings: d.runs.iter().filter(|r| r.group == group).map(|r| (r.strategy, r.co2_t)).collect(),
                })
            })
            .collect()
    }

    pub fn impact_records(&self) -> Vec<ImpactRecord> {
        let labels = self.group_labels();
        let mut out = Vec::new();
        for d in &self.days {
            for r in &d.runs {
                out.push(ImpactRecord {
                    date: d.date,
                    strategy: r.strategy,
                    group: labels[r.group].clone(),
                    co2_t: r.co2_t,
                    cost: r.cost,
                    payment: r.payment,
                    avg_price: r.avg_price,
                    demand_mwh: d.demand_mwh,
                    regime: d.regime,
                    min_lmp: d.min_lmp.clone(),
                });
            }
        }
        out
    }
}

fn lookup<T: Copy>(pairs: &[(String, T)], key: &str) -> Result<T> {
    pairs.iter().find(|(k, _)| k == key).map(|(_, v)| *v).ok_or_else(|| Error::UnknownBus(key.to_owned()))
}
