//! The per-day counterfactual pipeline: baseline dispatch, signals, every
//! requested strategy on every node group, and the year-level driver.

use chrono::NaiveDate;

use crate::dispatch::{co_optimize_benchmark, slot_responses, DayModel, DayScenario, DispatchResult, SlotResponses};
use crate::error::{Error, Result};
use crate::grid::{FlexLoadSpec, LoadShape, HOURS};
use crate::par::{map_ordered, Execution};
use crate::scenario_io::ScenarioBundle;
use crate::signals::{
    avg_carbon_intensity, day_features, grid_net_demand, lme_signal, lmp_signal, surrogate_cfeg, surrogate_wme, zonal_renewables,
    DayFeatures, SignalId, SignalVector,
};
use crate::strategies::{plan_day, BenchmarkContext, SignalBundle, StrategyId};

/// Share of a site's daily energy below which its zone counts as having no
/// renewables.
pub const NO_RENEWABLES_FRACTION: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub strategies: Vec<StrategyId>,
    /// Node groups shaped together, one or two flexible sites each; the
    /// remaining sites stay flat.
    pub groups: Vec<Vec<String>>,
    /// Strategies whose counterfactual dispatch is kept in full.
    pub keep_dispatch: Vec<StrategyId>,
    /// Derive wme and cfeg from the baseline when the bundle has no feed.
    pub surrogate_signals: bool,
    pub execution: Execution,
    /// Record failed days and go on instead of stopping at the first one.
    pub keep_going: bool,
}

impl ExperimentConfig {
    /// All strategies; every site alone and, with two sites, both together.
    pub fn for_bundle(bundle: &ScenarioBundle) -> Self {
        let sites: Vec<String> = bundle.flex_sites.iter().map(|s| s.bus.clone()).collect();
        let mut groups: Vec<Vec<String>> = sites.iter().map(|s| vec![s.clone()]).collect();
        if sites.len() == 2 {
            groups.push(sites.clone());
        }
        Self {
            strategies: StrategyId::ALL.to_vec(),
            groups,
            keep_dispatch: vec![StrategyId::Lmp],
            surrogate_signals: true,
            execution: Execution::Sequential,
            keep_going: false,
        }
    }

    fn validate(&self, bundle: &ScenarioBundle) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies requested".into()));
        }
        if self.groups.is_empty() {
            return Err(Error::Config("no node groups requested".into()));
        }
        for g in &self.groups {
            if g.is_empty() || g.len() > 2 {
                return Err(Error::Config(format!("a node group has one or two sites, got {g:?}")));
            }
            if g.len() == 2 && g[0] == g[1] {
                return Err(Error::Config(format!("node group repeats {}", g[0])));
            }
            for bus in g {
                if !bundle.flex_sites.iter().any(|s| &s.bus == bus) {
                    return Err(Error::Config(format!("{bus} is not a flexible site")));
                }
            }
        }
        Ok(())
    }
}

pub fn group_label(group: &[String]) -> String {
    group.join("+")
}

#[derive(Clone, Debug)]
pub struct StrategyRun {
    pub strategy: StrategyId,
    /// Index into [`ExperimentConfig::groups`].
    pub group: usize,
    pub shape: LoadShape,
    pub emissions_t: f64,
    pub total_cost: f64,
    pub load_payment: f64,
    pub avg_price: f64,
    pub dispatch: Option<DispatchResult>,
}

#[derive(Clone, Debug)]
pub struct DayOutcome {
    pub date: NaiveDate,
    /// Every flexible site flat.
    pub baseline: DispatchResult,
    pub features: DayFeatures,
    pub signals: SignalBundle,
    /// Per flexible site: whether its zone has usable wind and solar.
    pub renewables: Vec<(String, bool)>,
    pub runs: Vec<StrategyRun>,
}

impl DayOutcome {
    pub fn run(&self, group: usize, strategy: StrategyId) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.group == group && r.strategy == strategy)
    }

    pub fn has_renewables(&self, bus: &str) -> bool {
        self.renewables.iter().any(|(b, ok)| b == bus && *ok)
    }
}

#[derive(Debug, Default)]
pub struct YearOutcome {
    /// Successful days in date order.
    pub days: Vec<DayOutcome>,
    pub failures: Vec<(NaiveDate, Error)>,
}

fn site_specs(bundle: &ScenarioBundle, group: &[String]) -> (Vec<FlexLoadSpec>, Vec<FlexLoadSpec>) {
    let shaped = group.iter().filter_map(|b| bundle.flex_sites.iter().find(|s| &s.bus == b).cloned()).collect();
    let fixed = bundle.flex_sites.iter().filter(|s| !group.contains(&s.bus)).cloned().collect();
    (shaped, fixed)
}

fn strip(mut d: DispatchResult) -> DispatchResult {
    d.basis = None;
    d
}

/// Signals every strategy of the day may need, per flexible site.
pub fn day_signals(
    bundle: &ScenarioBundle,
    model: &DayModel<'_>,
    baseline: &DispatchResult,
    want: &[StrategyId],
    surrogate: bool,
) -> Result<SignalBundle> {
    let case = &bundle.case;
    let scenario = model.scenario();
    let date = scenario.date;
    let wants = |id: SignalId| want.iter().any(|s| s.signal() == Some(id));
    let mut out = SignalBundle::new();
    out.insert(grid_net_demand(case, scenario));
    if wants(SignalId::AvgCi) {
        out.insert(avg_carbon_intensity(case, baseline)?);
    }
    if wants(SignalId::Ws) {
        out.insert(zonal_renewables(case, scenario, None)?);
    }
    let cfeg_units = bundle.cfeg_indices()?;
    for site in &bundle.flex_sites {
        let b = case.bus_index(&site.bus).ok_or_else(|| Error::UnknownBus(site.bus.clone()))?;
        let zone = case.buses[b].zone.clone();
        out.insert(lmp_signal(case, baseline, b));
        if wants(SignalId::Lme) {
            out.insert(lme_signal(model, baseline, b)?);
        }
        if wants(SignalId::Zws) {
            let z = zonal_renewables(case, scenario, Some(&zone))?;
            out.insert(SignalVector { scope: site.bus.clone(), ..z });
        }
        for id in [SignalId::Wme, SignalId::Cfeg] {
            if !wants(id) {
                continue;
            }
            let external = bundle
                .external_signal(date, id, &site.bus)
                .or_else(|| bundle.external_signal(date, id, &zone))
                .or_else(|| bundle.external_signal(date, id, "grid"));
            let sig = match external {
                Some(s) => Some(SignalVector { scope: site.bus.clone(), ..s }),
                None if surrogate => Some(match id {
                    SignalId::Wme => surrogate_wme(case, baseline, b),
                    _ => surrogate_cfeg(baseline, &cfeg_units, &site.bus),
                }),
                None => None,
            };
            if let Some(s) = sig {
                out.insert(s);
            }
        }
    }
    Ok(out)
}

/// Whether the zone of each site has available wind and solar of at least
/// [`NO_RENEWABLES_FRACTION`] of the site's daily energy.
pub fn renewable_flags(bundle: &ScenarioBundle, scenario: &DayScenario) -> Result<Vec<(String, bool)>> {
    let case = &bundle.case;
    let mut out = Vec::new();
    for site in &bundle.flex_sites {
        let b = case.bus_index(&site.bus).ok_or_else(|| Error::UnknownBus(site.bus.clone()))?;
        let z = zonal_renewables(case, scenario, Some(&case.buses[b].zone))?;
        let mwh: f64 = z.values.iter().sum();
        out.push((site.bus.clone(), mwh >= NO_RENEWABLES_FRACTION * site.daily_budget_mwh() as f64));
    }
    Ok(out)
}

/// Runs one day: the flat baseline, then every strategy on every group.
/// Within a group `opt` runs last and also tries the other strategies'
/// shapes, so it is never beaten by them.
pub fn run_day(bundle: &ScenarioBundle, scenario: &DayScenario, cfg: &ExperimentConfig) -> Result<DayOutcome> {
    cfg.validate(bundle)?;
    let case = &bundle.case;
    let model = DayModel::new(case, scenario)?;
    let flat = LoadShape::flat(&bundle.flex_sites)?;
    let baseline = model.solve(&flat, None)?;
    let buses: Vec<String> = bundle.flex_sites.iter().map(|s| s.bus.clone()).collect();
    let features = day_features(case, scenario, &baseline, &buses)?;
    let signals = day_signals(bundle, &model, &baseline, &cfg.strategies, cfg.surrogate_signals)?;
    let renewables = renewable_flags(bundle, scenario)?;
    let keep = |s: StrategyId| cfg.keep_dispatch.contains(&s);

    let want_opt = cfg.strategies.contains(&StrategyId::Opt);
    let mut responses: Vec<(String, SlotResponses)> = Vec::new();
    if want_opt {
        for site in &bundle.flex_sites {
            if cfg.groups.iter().any(|g| g.contains(&site.bus)) {
                responses.push((site.bus.clone(), slot_responses(&model, &baseline, std::slice::from_ref(site))?));
            }
        }
    }

    let mut runs = Vec::new();
    for (gi, group) in cfg.groups.iter().enumerate() {
        let (specs, fixed) = site_specs(bundle, group);
        let mut seeds = Vec::new();
        for &strategy in cfg.strategies.iter().filter(|s| **s != StrategyId::Opt) {
            let run = if strategy == StrategyId::Base {
                let shape = LoadShape::flat(&specs)?;
                seeds.push(shape.clone());
                StrategyRun {
                    strategy,
                    group: gi,
                    shape: flat.clone(),
                    emissions_t: baseline.emissions_t,
                    total_cost: baseline.total_cost,
                    load_payment: baseline.load_payment,
                    avg_price: baseline.average_price(),
                    dispatch: keep(strategy).then(|| strip(baseline.clone())),
                }
            } else {
                let plan = plan_day(strategy, &signals, &specs, &fixed, None).map_err(|e| with_day(e, scenario.date, strategy))?;
                seeds.push(LoadShape::new(plan.shape.nodes()[..specs.len()].to_vec())?);
                let d = model.solve(&plan.shape, baseline.basis.as_ref())?;
                finish(strategy, gi, plan.shape, d, keep(strategy))
            };
            runs.push(run);
        }
        if want_opt {
            if group.len() == 2 {
                let singles: Vec<&StrategyRun> = runs
                    .iter()
                    .filter(|r| r.strategy == StrategyId::Opt && cfg.groups[r.group].len() == 1)
                    .collect();
                let parts: Option<Vec<_>> = group
                    .iter()
                    .map(|b| singles.iter().find(|r| &cfg.groups[r.group][0] == b).and_then(|r| r.shape.node(b).cloned()))
                    .collect();
                if let Some(nodes) = parts {
                    seeds.push(LoadShape::new(nodes)?);
                }
            }
            let mut ctx = BenchmarkContext::new(&model, Some(&baseline));
            ctx.seeds = seeds;
            let parts: Option<Vec<&SlotResponses>> =
                group.iter().map(|b| responses.iter().find(|(s, _)| s == b).map(|(_, r)| r)).collect();
            ctx.responses = parts.map(|p| SlotResponses::concat(&p));
            let out = co_optimize_benchmark(&model, Some(&baseline), &ctx.config(&specs, &fixed))
                .map_err(|e| with_day(e, scenario.date, StrategyId::Opt))?;
            runs.push(finish(StrategyId::Opt, gi, out.shape, out.dispatch, keep(StrategyId::Opt)));
        }
    }
    Ok(DayOutcome { date: scenario.date, baseline: strip(baseline), features, signals, renewables, runs })
}

fn finish(strategy: StrategyId, group: usize, shape: LoadShape, d: DispatchResult, keep: bool) -> StrategyRun {
    StrategyRun {
        strategy,
        group,
        shape,
        emissions_t: d.emissions_t,
        total_cost: d.total_cost,
        load_payment: d.load_payment,
        avg_price: d.average_price(),
        dispatch: keep.then(|| strip(d)),
    }
}

fn with_day(e: Error, date: NaiveDate, strategy: StrategyId) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{date} {strategy}: {msg}")),
        other => other,
    }
}

/// Solver errors carry no date of their own.
fn dated(e: Error, date: NaiveDate) -> Error {
    match e {
        Error::Lp(lp) => Error::Numerical { date, context: lp.to_string() },
        other => other,
    }
}

/// Runs every day of the bundle. Days are independent and may run in
/// parallel; results come back in date order.
pub fn run_year(bundle: &ScenarioBundle, cfg: &ExperimentConfig) -> Result<YearOutcome> {
    cfg.validate(bundle)?;
    let results = map_ordered(cfg.execution, &bundle.days, |day| (day.date, run_day(bundle, day, cfg).map_err(|e| dated(e, day.date))));
    let mut out = YearOutcome::default();
    for (date, r) in results {
        match r {
            Ok(d) => out.days.push(d),
            Err(e) if cfg.keep_going => out.failures.push((date, e)),
            Err(e) => return Err(e),
        }
    }
    out.days.sort_by_key(|d| d.date);
    Ok(out)
}

/// Hourly GND at every day of a year outcome, for regime fitting.
pub fn gnd_profiles(year: &YearOutcome) -> Vec<[f64; HOURS]> {
    year.days.iter().map(|d| d.features.gnd).collect()
}
