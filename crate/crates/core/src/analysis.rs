//! Counterfactual accounting and the tables behind the reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use chrono::NaiveDate;
use serde::Serialize;

use crate::dispatch::{marginal_unit, DispatchResult};
use crate::error::{Error, Result};
use crate::experiment::{group_label, DayOutcome, ExperimentConfig, YearOutcome};
use crate::grid::{GridCase, Technology, HOURS};
use crate::policy::{AttributionRow, Availability, DayRecord, Regime, RegimeModel};
use crate::signals::{dispatch_net_demand, RenewableBasis, SignalId};
use crate::strategies::StrategyId;

/// Change of a counterfactual against its baseline. Positive `co2_t` means
/// emissions saved.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ImpactDelta {
    pub co2_t: f64,
    /// Bid cost of the dispatch, $.
    pub cost: f64,
    /// Load payment, $.
    pub payment: f64,
    /// Demand-weighted average LMP, $/MWh.
    pub avg_price: f64,
}

/// Saved emissions and the changes in cost and price (counterfactual minus
/// baseline).
pub fn impact(baseline: &DispatchResult, counterfactual: &DispatchResult) -> Result<ImpactDelta> {
    if baseline.date != counterfactual.date {
        return Err(Error::Config(format!("baseline of {} compared with counterfactual of {}", baseline.date, counterfactual.date)));
    }
    if baseline.gen_mw.len() != counterfactual.gen_mw.len() || baseline.bus_demand.len() != counterfactual.bus_demand.len() {
        return Err(Error::Config(format!("{}: dispatches come from different cases", baseline.date)));
    }
    Ok(ImpactDelta {
        co2_t: baseline.emissions_t - counterfactual.emissions_t,
        cost: counterfactual.total_cost - baseline.total_cost,
        payment: counterfactual.load_payment - baseline.load_payment,
        avg_price: counterfactual.average_price() - baseline.average_price(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpactRecord {
    pub date: NaiveDate,
    pub strategy: StrategyId,
    /// Shaped sites joined by `+`.
    pub group: String,
    pub co2_t: f64,
    pub cost: f64,
    pub payment: f64,
    pub avg_price: f64,
    /// Grid energy of the baseline day, MWh; weights price averages.
    pub demand_mwh: f64,
    pub regime: Option<Regime>,
    /// min(LMP) per flexible site, in site order.
    pub min_lmp: Vec<(String, f64)>,
}

/// Impact records of every run of every day, in day, group, strategy order.
pub fn impact_records(year: &YearOutcome, cfg: &ExperimentConfig, regimes: Option<&RegimeModel>) -> Vec<ImpactRecord> {
    let mut out = Vec::new();
    for day in &year.days {
        out.extend(day_records(day, cfg, regimes));
    }
    out
}

fn day_records(day: &DayOutcome, cfg: &ExperimentConfig, regimes: Option<&RegimeModel>) -> Vec<ImpactRecord> {
    let b = &day.baseline;
    let regime = regimes.map(|m| m.classify(&day.features.gnd));
    let min_lmp: Vec<(String, f64)> = day.features.lmp.iter().map(|(bus, s)| (bus.clone(), s.min)).collect();
    let demand_mwh = day.features.total_demand_mwh;
    let mut runs: Vec<_> = day.runs.iter().collect();
    runs.sort_by_key(|r| (r.group, r.strategy.name()));
    runs.into_iter()
        .map(|r| ImpactRecord {
            date: day.date,
            strategy: r.strategy,
            group: group_label(&cfg.groups[r.group]),
            co2_t: b.emissions_t - r.emissions_t,
            cost: r.total_cost - b.total_cost,
            payment: r.load_payment - b.load_payment,
            avg_price: r.avg_price - b.average_price(),
            demand_mwh,
            regime,
            min_lmp: min_lmp.clone(),
        })
        .collect()
}

/// The tuner's view of one node group: per day its regime, the min(LMP) at
/// the group's first site, the fallback flags there and the savings of every
/// strategy.
pub fn policy_days(year: &YearOutcome, cfg: &ExperimentConfig, group: usize, regimes: &RegimeModel) -> Result<Vec<DayRecord>> {
    let lead = cfg.groups.get(group).and_then(|g| g.first()).ok_or_else(|| Error::Config(format!("no node group {group}")))?;
    let mut out = Vec::with_capacity(year.days.len());
    for day in &year.days {
        let min_lmp = day.features.min_lmp(lead).ok_or_else(|| Error::UnknownBus(lead.clone()))?;
        let savings = day
            .runs
            .iter()
            .filter(|r| r.group == group)
            .map(|r| (r.strategy, day.baseline.emissions_t - r.emissions_t))
            .collect();
        out.push(DayRecord {
            date: day.date,
            regime: regimes.classify(&day.features.gnd),
            min_lmp,
            avail: Availability {
                renewables: day.has_renewables(lead),
                wme: day.signals.iter().any(|s| s.id == SignalId::Wme && &s.scope == lead),
            },
            savings,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyTotal {
    pub group: String,
    pub strategy: StrategyId,
    pub days: usize,
    pub co2_t: f64,
    pub cost: f64,
    pub payment: f64,
    /// Demand-weighted mean change of the average price, $/MWh.
    pub avg_price: f64,
}

/// Yearly totals per (group, strategy), sorted by group then strategy name.
/// Sums run in date order, so they do not depend on the input order.
pub fn yearly_summary(records: &[ImpactRecord]) -> Vec<StrategyTotal> {
    let mut sorted: Vec<&ImpactRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.group, a.strategy.name(), a.date).cmp(&(&b.group, b.strategy.name(), b.date)));
    let mut out: Vec<StrategyTotal> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for r in sorted {
        let fresh = out.last().is_none_or(|t| t.group != r.group || t.strategy != r.strategy);
        if fresh {
            out.push(StrategyTotal { group: r.group.clone(), strategy: r.strategy, days: 0, co2_t: 0.0, cost: 0.0, payment: 0.0, avg_price: 0.0 });
            weights.push(0.0);
        }
        let t = out.last_mut().expect("pushed");
        let w = weights.last_mut().expect("pushed");
        t.days += 1;
        t.co2_t += r.co2_t;
        t.cost += r.cost;
        t.payment += r.payment;
        t.avg_price += r.avg_price * r.demand_mwh;
        *w += r.demand_mwh;
    }
    for (t, w) in out.iter_mut().zip(weights) {
        t.avg_price = if w > 0.0 { t.avg_price / w } else { 0.0 };
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakHoursDelta {
    /// Mean (baseline - counterfactual) MW per technology over the hours.
    pub per_technology: Vec<(Technology, f64)>,
    /// (date, hour) of the selected hours, highest GND first.
    pub hours: Vec<(NaiveDate, usize)>,
    /// Fewer hours than requested were available.
    pub short: bool,
}

fn check_pairs(baselines: &[&DispatchResult], counterfactuals: &[&DispatchResult]) -> Result<()> {
    if baselines.len() != counterfactuals.len() {
        return Err(Error::Config(format!("{} baselines but {} counterfactuals", baselines.len(), counterfactuals.len())));
    }
    for (b, c) in baselines.iter().zip(counterfactuals) {
        if b.date != c.date {
            return Err(Error::Config(format!("baseline of {} paired with counterfactual of {}", b.date, c.date)));
        }
    }
    Ok(())
}

/// Per-technology generation change during the `n` hours with the highest
/// baseline GND (available renewables). Ties go to the earlier hour.
pub fn peak_hours_delta(case: &GridCase, baselines: &[&DispatchResult], counterfactuals: &[&DispatchResult], n: usize) -> Result<PeakHoursDelta> {
    check_pairs(baselines, counterfactuals)?;
    let mut hours: Vec<(f64, usize, usize)> = Vec::new();
    for (d, b) in baselines.iter().enumerate() {
        let gnd = dispatch_net_demand(case, b, RenewableBasis::Available);
        for (h, g) in gnd.iter().enumerate() {
            hours.push((*g, d, h));
        }
    }
    hours.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let short = hours.len() < n;
    hours.truncate(n);
    let mut sums = [0.0; Technology::ALL.len()];
    for &(_, d, h) in &hours {
        for (g, spec) in case.generators.iter().enumerate() {
            sums[spec.technology.index()] += baselines[d].gen_mw[g][h] - counterfactuals[d].gen_mw[g][h];
        }
    }
    let k = hours.len().max(1) as f64;
    Ok(PeakHoursDelta {
        per_technology: Technology::ALL.iter().map(|t| (*t, sums[t.index()] / k)).collect(),
        hours: hours.iter().map(|&(_, d, h)| (baselines[d].date, h)).collect(),
        short,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakGnd {
    pub baseline_mw: f64,
    pub counterfactual_mw: f64,
    /// Baseline peak minus counterfactual peak.
    pub reduction_mw: f64,
    pub date: NaiveDate,
    pub hour: usize,
    /// Grid demand change at the baseline peak hour.
    pub change_at_peak_mw: f64,
}

/// Change of the yearly maximum GND (demand including flexible loads minus
/// available wind and solar).
pub fn peak_gnd_reduction(case: &GridCase, baselines: &[&DispatchResult], counterfactuals: &[&DispatchResult]) -> Result<PeakGnd> {
    check_pairs(baselines, counterfactuals)?;
    if baselines.is_empty() {
        return Err(Error::Config("no days to compare".into()));
    }
    let mut peak = (f64::NEG_INFINITY, 0, 0);
    let mut cf_peak = f64::NEG_INFINITY;
    for (d, (b, c)) in baselines.iter().zip(counterfactuals).enumerate() {
        let gb = dispatch_net_demand(case, b, RenewableBasis::Available);
        let gc = dispatch_net_demand(case, c, RenewableBasis::Available);
        for h in 0..HOURS {
            if gb[h] > peak.0 {
                peak = (gb[h], d, h);
            }
            cf_peak = cf_peak.max(gc[h]);
        }
    }
    let (bmax, d, h) = peak;
    Ok(PeakGnd {
        baseline_mw: bmax,
        counterfactual_mw: cf_peak,
        reduction_mw: bmax - cf_peak,
        date: baselines[d].date,
        hour: h,
        change_at_peak_mw: counterfactuals[d].grid_demand()[h] - baselines[d].grid_demand()[h],
    })
}

/// min(LMP) bins used by the frequency tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LmpBin {
    Below5,
    From5To10,
    From10,
}

impl LmpBin {
    pub const ALL: [LmpBin; 3] = [LmpBin::Below5, LmpBin::From5To10, LmpBin::From10];

    pub fn of(min_lmp: f64) -> Self {
        if min_lmp < 5.0 {
            LmpBin::Below5
        } else if min_lmp < 10.0 {
            LmpBin::From5To10
        } else {
            LmpBin::From10
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LmpBin::Below5 => "lt5",
            LmpBin::From5To10 => "5to10",
            LmpBin::From10 => "ge10",
        }
    }
}

/// One baseline day as the history analyses see it.
#[derive(Clone, Copy, Debug)]
pub struct HistoryDay<'a> {
    pub dispatch: &'a DispatchResult,
    pub min_lmp: f64,
    pub regime: Option<Regime>,
}

/// Hour-to-hour increases of grid demand and the technologies that served
/// them. The first hour of a day is compared with the last hour of the
/// previous day when the dates are consecutive.
pub fn attribute_demand_increases(case: &GridCase, days: &[HistoryDay<'_>]) -> Vec<AttributionRow> {
    let mut out = Vec::new();
    let mut prev: Option<(NaiveDate, f64, Vec<f64>)> = None;
    for day in days {
        let d = day.dispatch;
        let demand = d.grid_demand();
        for h in 0..HOURS {
            let gen: Vec<f64> = d.gen_mw.iter().map(|g| g[h]).collect();
            let before = if h > 0 {
                Some((demand[h - 1], d.gen_mw.iter().map(|g| g[h - 1]).collect::<Vec<f64>>()))
            } else {
                prev.take().filter(|(date, _, _)| date.succ_opt() == Some(d.date)).map(|(_, dem, g)| (dem, g))
            };
            if let Some((dem0, gen0)) = before {
                let increase = demand[h] - dem0;
                if increase > 0.0 {
                    let mut per_tech = [0.0; Technology::ALL.len()];
                    for (g, spec) in case.generators.iter().enumerate() {
                        let up = gen[g] - gen0[g];
                        if up > 0.0 {
                            per_tech[spec.technology.index()] += up;
                        }
                    }
                    let total: f64 = per_tech.iter().sum();
                    let shares = Technology::ALL
                        .iter()
                        .filter(|t| per_tech[t.index()] > 0.0)
                        .map(|t| (*t, per_tech[t.index()] / total))
                        .collect();
                    out.push(AttributionRow {
                        date: d.date,
                        hour: h,
                        increase_mw: increase,
                        shares,
                        curtailment_mwh: d.curtailment.iter().map(|c| c[h]).sum(),
                        min_lmp: day.min_lmp,
                        regime: day.regime,
                    });
                }
            }
        }
        prev = Some((d.date, demand[HOURS - 1], d.gen_mw.iter().map(|g| g[HOURS - 1]).collect()));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttributionSummary {
    pub regime: Option<Regime>,
    pub bin: LmpBin,
    pub technology: Technology,
    /// Increase hours in the cell.
    pub hours: usize,
    /// Share of those hours in which the technology contributed.
    pub frequency: f64,
    pub mean_share: f64,
}

/// Contribution frequency per (regime, min(LMP) bin, technology).
pub fn summarize_attribution(rows: &[AttributionRow]) -> Vec<AttributionSummary> {
    let mut cells: BTreeMap<(Option<Regime>, LmpBin), (usize, [usize; 11], [f64; 11])> = BTreeMap::new();
    for r in rows {
        let cell = cells.entry((r.regime, LmpBin::of(r.min_lmp))).or_insert((0, [0; 11], [0.0; 11]));
        cell.0 += 1;
        for (t, s) in &r.shares {
            cell.1[t.index()] += 1;
            cell.2[t.index()] += s;
        }
    }
    let mut out = Vec::new();
    for ((regime, bin), (n, count, share)) in cells {
        for t in Technology::ALL {
            out.push(AttributionSummary {
                regime,
                bin,
                technology: t,
                hours: n,
                frequency: count[t.index()] as f64 / n as f64,
                mean_share: share[t.index()] / n as f64,
            });
        }
    }
    out
}

/// Non-coal (wind, solar, gas) to coal ratio of contribution counts among
/// rows passing `keep`. Infinite when coal never contributes.
pub fn non_coal_coal_ratio(rows: &[AttributionRow], keep: impl Fn(&AttributionRow) -> bool) -> f64 {
    let (mut nc, mut c) = (0.0, 0.0);
    for r in rows.iter().filter(|r| keep(r)) {
        for (t, s) in &r.shares {
            if *s <= 0.0 {
                continue;
            }
            if *t == Technology::Coal {
                c += 1.0;
            } else if t.is_intermittent() || t.is_gas() {
                nc += 1.0;
            }
        }
    }
    if c > 0.0 {
        nc / c
    } else if nc > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalRow {
    pub bin: LmpBin,
    /// Technology name, or `indeterminate`.
    pub marginal: String,
    pub hours: usize,
    pub share: f64,
}

/// Frequency of each marginal technology at `bus` per day min(LMP) bin.
pub fn marginal_tech_by_minlmp(case: &GridCase, days: &[HistoryDay<'_>], bus: usize) -> Vec<MarginalRow> {
    let mut cells: BTreeMap<LmpBin, BTreeMap<String, usize>> = BTreeMap::new();
    for day in days {
        let cell = cells.entry(LmpBin::of(day.min_lmp)).or_default();
        for h in 0..HOURS {
            let name = match marginal_unit(case, day.dispatch, bus, h) {
                Some(g) => case.generators[g].technology.name().to_owned(),
                None => "indeterminate".to_owned(),
            };
            *cell.entry(name).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for (bin, counts) in cells {
        let total: usize = counts.values().sum();
        for (marginal, hours) in counts {
            out.push(MarginalRow { bin, marginal, hours, share: hours as f64 / total as f64 });
        }
    }
    out
}

/// Share of hours in `bin` whose marginal unit is wind or solar.
pub fn renewable_marginal_share(rows: &[MarginalRow], bin: LmpBin) -> f64 {
    rows.iter()
        .filter(|r| r.bin == bin && (r.marginal == Technology::Wind.name() || r.marginal == Technology::Solar.name()))
        .map(|r| r.share)
        .sum()
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("writing CSV", e.into())
}

/// `date,group,strategy,regime,co2_t,cost,payment,avg_price,min_lmp_<site>...`
pub fn write_impact_csv<W: Write>(records: &[ImpactRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let sites: Vec<String> = records.first().map(|r| r.min_lmp.iter().map(|(b, _)| b.clone()).collect()).unwrap_or_default();
    let mut header = vec!["date".to_owned(), "group".into(), "strategy".into(), "regime".into()];
    header.extend(["co2_t", "cost", "payment", "avg_price", "demand_mwh"].map(String::from));
    header.extend(sites.iter().map(|s| format!("min_lmp_{s}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.date.to_string(),
            r.group.clone(),
            r.strategy.name().to_owned(),
            r.regime.map_or(String::new(), |g| g.name().to_owned()),
        ];
        row.extend([r.co2_t, r.cost, r.payment, r.avg_price, r.demand_mwh].map(|v| v.to_string()));
        row.extend(r.min_lmp.iter().map(|(_, v)| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing CSV", e))
}

/// `group,strategy,days,co2_kt,cost,payment,avg_price`
pub fn write_summary_csv<W: Write>(totals: &[StrategyTotal], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "strategy", "days", "co2_kt", "cost", "payment", "avg_price"]).map_err(csv_err)?;
    for t in totals {
        w.write_record([
            t.group.clone(),
            t.strategy.name().to_owned(),
            t.days.to_string(),
            format!("{:.3}", t.co2_t / 1000.0),
            t.cost.to_string(),
            t.payment.to_string(),
            t.avg_price.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing CSV", e))
}

pub fn write_attribution_csv<W: Write>(rows: &[AttributionSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["regime", "min_lmp_bin", "technology", "hours", "frequency", "mean_share"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.regime.map_or(String::new(), |g| g.name().to_owned()),
            r.bin.name().to_owned(),
            r.technology.name().to_owned(),
            r.hours.to_string(),
            r.frequency.to_string(),
            r.mean_share.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing CSV", e))
}

pub fn write_marginal_csv<W: Write>(rows: &[MarginalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["min_lmp_bin", "marginal", "hours", "share"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.bin.name().to_owned(), r.marginal.clone(), r.hours.to_string(), r.share.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing CSV", e))
}

/// Yearly savings per group as a plain-text table, kt with 3 decimals.
pub fn render_summary(totals: &[StrategyTotal], extra: &[(String, String, f64)]) -> String {
    let mut s = String::new();
    let mut groups: Vec<&str> = totals.iter().map(|t| t.group.as_str()).collect();
    groups.dedup();
    let _ = writeln!(s, "{:<12} {:>22} {:>14}", "strategy", "group", "ktCO2 saved");
    for g in &groups {
        for t in totals.iter().filter(|t| t.group == *g) {
            let _ = writeln!(s, "{:<12} {:>22} {:>14.3}   avg price {:+.3} $/MWh", t.strategy.name(), g, t.co2_t / 1000.0, t.avg_price);
        }
        for (name, group, v) in extra.iter().filter(|e| e.1 == *g) {
            let _ = writeln!(s, "{:<12} {:>22} {:>14.3}", name, group, v / 1000.0);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(date: NaiveDate, gen: Vec<[f64; HOURS]>, demand: Vec<[f64; HOURS]>, lmp: f64) -> DispatchResult {
        let n_gen = gen.len();
        let n_bus = demand.len();
        let payment: f64 = demand.iter().flatten().map(|d| d * lmp).sum();
        DispatchResult {
            date,
            gen_mw: gen,
            lmp: vec![[lmp; HOURS]; n_bus],
            flow: Vec::new(),
            curtailment: vec![[0.0; HOURS]; n_gen],
            available_mw: vec![[0.0; HOURS]; n_gen],
            bus_demand: demand,
            total_cost: 0.0,
            load_payment: payment,
            emissions_t: 0.0,
            gen_interior: vec![[false; HOURS]; n_gen],
            basis: None,
        }
    }

    #[test]
    fn identity_has_zero_impact() {
        let d = NaiveDate::from_ymd_opt(2023, 3, 1).unwrap();
        let r = result(d, vec![[100.0; HOURS]], vec![[100.0; HOURS]], 20.0);
        assert_eq!(impact(&r, &r).unwrap(), ImpactDelta::default());
    }

    #[test]
    fn mismatched_dates_are_rejected() {
        let d = NaiveDate::from_ymd_opt(2023, 3, 1).unwrap();
        let a = result(d, vec![[1.0; HOURS]], vec![[1.0; HOURS]], 1.0);
        let b = result(d.succ_opt().unwrap(), vec![[1.0; HOURS]], vec![[1.0; HOURS]], 1.0);
        assert!(impact(&a, &b).is_err());
    }

    fn rec(strategy: StrategyId, co2: f64) -> ImpactRecord {
        ImpactRecord {
            date: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            strategy,
            group: "a".into(),
            co2_t: co2,
            cost: 0.0,
            payment: 0.0,
            avg_price: 0.0,
            demand_mwh: 1.0,
            regime: None,
            min_lmp: Vec::new(),
        }
    }

    #[test]
    fn opposite_days_cancel() {
        let t = yearly_summary(&[rec(StrategyId::Lmp, 1000.0), rec(StrategyId::Lmp, -1000.0)]);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].co2_t, 0.0);
    }

    #[test]
    fn bins() {
        assert_eq!(LmpBin::of(-3.0), LmpBin::Below5);
        assert_eq!(LmpBin::of(5.0), LmpBin::From5To10);
        assert_eq!(LmpBin::of(10.0), LmpBin::From10);
    }
}
