use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use shapelab_core::analysis::{
    attribute_demand_increases, marginal_tech_by_minlmp, peak_gnd_reduction, peak_hours_delta, render_summary, summarize_attribution,
    write_attribution_csv, write_impact_csv, write_marginal_csv, write_summary_csv, yearly_summary, HistoryDay,
};
use shapelab_core::dispatch::{write_dispatch_csv, write_lmp_csv, DispatchResult};
use shapelab_core::experiment::{gnd_profiles, group_label, run_year, ExperimentConfig, YearOutcome};
use shapelab_core::feature_study::{
    best_strategy_labels, cross_validate, feature_importance, majority_rate, median_rule_labels, rule_labels, train_forest,
    write_importance_csv, ForestConfig, LabeledDay,
};
use shapelab_core::par::Execution;
use shapelab_core::policy::{
    default_fallbacks, default_threshold_grid, derive_thresholds_from_history, evaluate_policy, fit_gnd_regimes, loocv, sensitivity,
    tune_thresholds, CherryPickPolicy, HistoryOptions, Regime, RegimeModel, TuneOptions,
};
use shapelab_core::scenario_io::{generate_synthetic_year, load_bundle, write_bundle, ScenarioBundle, SynthConfig};
use shapelab_core::strategies::StrategyId;
use shapelab_core::{Error, Result};

use crate::days;
use crate::state::RunState;
use crate::{FeatureArgs, GenerateArgs, LabelKind, ReportArgs, SimulateArgs, TuneArgs};

/// Hours behind the peak-hour dispatch table.
const PEAK_HOURS: usize = 100;
const MIN_REGIME_DAYS: usize = 4;
/// Strategies the cherry-picking rule chooses between by default.
const RULE_CANDIDATES: [StrategyId; 3] = [StrategyId::Lmp, StrategyId::Zws, StrategyId::Wme];

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path.display().to_string(), e))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path.display().to_string(), e.into())
}

/// Writes a CSV with `header` and `rows` in one go.
fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_strategies(names: &[String]) -> Result<Vec<StrategyId>> {
    let mut out = Vec::new();
    for n in names {
        let n = n.trim();
        if n == "all" {
            out.extend(StrategyId::ALL);
        } else {
            out.push(n.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn read_policy(path: &Path) -> Result<CherryPickPolicy> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    CherryPickPolicy::from_json(&text)
}

fn policy_strategies(p: &CherryPickPolicy) -> Vec<StrategyId> {
    let mut out = vec![p.low_gnd.below, p.low_gnd.at_or_above, p.high_gnd.below, p.high_gnd.at_or_above];
    out.extend(p.fallbacks.iter().flat_map(|f| [f.strategy, f.replacement]));
    out
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let cfg = SynthConfig { seed: args.seed, days: args.days, ..SynthConfig::default() };
    let bundle = generate_synthetic_year(&cfg)?;
    write_bundle(&bundle, &args.out)?;
    println!("wrote {} days, {} flexible sites to {}", bundle.days.len(), bundle.flex_sites.len(), args.out.display());
    Ok(())
}

fn node_groups(bundle: &ScenarioBundle, nodes: &[String]) -> Result<Vec<Vec<String>>> {
    let nodes: Vec<String> = nodes.iter().map(|n| n.trim().to_owned()).filter(|n| !n.is_empty()).collect();
    for n in &nodes {
        if !bundle.flex_sites.iter().any(|s| &s.bus == n) {
            return Err(Error::Config(format!("{n} is not a flexible site of the bundle")));
        }
    }
    Ok(match nodes.len() {
        0 => ExperimentConfig::for_bundle(bundle).groups,
        1 => vec![nodes],
        2 if nodes[0] != nodes[1] => vec![vec![nodes[0].clone()], vec![nodes[1].clone()], nodes],
        _ => return Err(Error::Config("--nodes takes one or two distinct sites".into())),
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let mut bundle = load_bundle(&args.bundle)?;
    if let Some(span) = args.days {
        bundle.days = days::select(std::mem::take(&mut bundle.days), span)?;
    }
    let policy = args.policy.as_deref().map(read_policy).transpose()?;
    let mut strategies = parse_strategies(&args.strategy)?;
    if let Some(p) = &policy {
        strategies.extend(policy_strategies(p));
    } else if strategies.is_empty() {
        return Err(Error::Config("give --strategy or --policy".into()));
    }
    strategies.sort();
    strategies.dedup();

    let mut cfg = ExperimentConfig::for_bundle(&bundle);
    cfg.groups = node_groups(&bundle, &args.nodes)?;
    let named: Vec<StrategyId> = if args.strategy.iter().any(|s| s.trim() == "all") { Vec::new() } else { parse_strategies(&args.strategy)? };
    cfg.keep_dispatch = named.into_iter().chain([StrategyId::Lmp]).filter(|s| strategies.contains(s)).collect();
    cfg.strategies = strategies;
    cfg.execution = Execution::from_jobs(args.jobs);
    cfg.keep_going = args.keep_going;

    let year = run_year(&bundle, &cfg)?;
    for (date, e) in &year.failures {
        eprintln!("skipped {date}: {e}");
    }
    if year.days.is_empty() {
        return Err(Error::Config("no day could be simulated".into()));
    }
    let regimes = match policy.as_ref().and_then(|p| p.regimes.clone()) {
        Some(m) => Some(m),
        None if year.days.len() >= MIN_REGIME_DAYS => Some(fit_gnd_regimes(&gnd_profiles(&year), args.seed)?),
        None => None,
    };
    let sites: Vec<String> = bundle.flex_sites.iter().map(|s| s.bus.clone()).collect();
    let state = RunState::from_year(&year, &cfg, sites, regimes.clone(), args.seed);

    let out = &args.out;
    out_dir(out)?;
    state.save(out)?;
    let records = state.impact_records();
    write_impact_csv(&records, create(&out.join("impact.csv"))?)?;
    write_summary_csv(&yearly_summary(&records), create(&out.join("summary.csv"))?)?;
    write_features(&state, &out.join("features.csv"))?;
    write_peaks(&bundle, &year, &cfg, out)?;
    write_history(&bundle, &year, &cfg, regimes.as_ref(), out)?;
    if args.export_dispatch {
        export_dispatch(&bundle, &year, &cfg, &out.join("dispatch"))?;
    }
    if !state.failures.is_empty() {
        write_rows(&out.join("failures.csv"), &["date", "error"], state.failures.iter().map(|(d, e)| vec![d.to_string(), e.clone()]))?;
    }
    if let Some(p) = &policy {
        let mut rows = Vec::new();
        for g in 0..state.groups.len() {
            let days = state.day_records(g)?;
            let (total, picks) = evaluate_policy(&days, p)?;
            for (d, (date, s)) in days.iter().zip(picks) {
                rows.push(vec![date.to_string(), group_label(&state.groups[g]), d.regime.name().into(), d.min_lmp.to_string(), s.name().into(), d.saving(s)?.to_string()]);
            }
            println!("policy on {}: {:.3} ktCO2 saved", group_label(&state.groups[g]), total / 1000.0);
        }
        write_rows(&out.join("policy.csv"), &["date", "group", "regime", "min_lmp", "strategy", "co2_t"], rows)?;
    }
    println!("simulated {} days ({} failed), {} strategies, {} node groups -> {}", state.days.len(), state.failures.len(), cfg.strategies.len(), cfg.groups.len(), out.display());
    Ok(())
}

fn write_features(state: &RunState, path: &Path) -> Result<()> {
    let mut header = vec!["date", "regime"];
    header.extend(state.feature_names.iter().map(String::as_str));
    let rows = state.days.iter().map(|d| {
        let mut r = vec![d.date.to_string(), d.regime.map_or(String::new(), |g| g.name().into())];
        r.extend(d.features.iter().map(f64::to_string));
        r
    });
    write_rows(path, &header, rows)
}

/// Yearly peak GND and top-GND-hour dispatch changes for every kept run.
fn write_peaks(bundle: &ScenarioBundle, year: &YearOutcome, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let baselines: Vec<&DispatchResult> = year.days.iter().map(|d| &d.baseline).collect();
    let (mut peaks, mut hours) = (Vec::new(), Vec::new());
    for (g, group) in cfg.groups.iter().enumerate() {
        for &s in &cfg.keep_dispatch {
            let cfs: Option<Vec<&DispatchResult>> = year.days.iter().map(|d| d.run(g, s).and_then(|r| r.dispatch.as_ref())).collect();
            let Some(cfs) = cfs else { continue };
            let label = group_label(group);
            let p = peak_gnd_reduction(&bundle.case, &baselines, &cfs)?;
            peaks.push(vec![
                label.clone(),
                s.name().into(),
                p.baseline_mw.to_string(),
                p.counterfactual_mw.to_string(),
                p.reduction_mw.to_string(),
                p.date.to_string(),
                p.hour.to_string(),
                p.change_at_peak_mw.to_string(),
            ]);
            let h = peak_hours_delta(&bundle.case, &baselines, &cfs, PEAK_HOURS)?;
            for (t, mw) in h.per_technology {
                hours.push(vec![label.clone(), s.name().into(), t.name().into(), mw.to_string(), h.hours.len().to_string()]);
            }
        }
    }
    write_rows(
        &out.join("peak_gnd.csv"),
        &["group", "strategy", "baseline_peak_mw", "counterfactual_peak_mw", "reduction_mw", "date", "hour", "change_at_peak_mw"],
        peaks,
    )?;
    write_rows(&out.join("peak_hours.csv"), &["group", "strategy", "technology", "mean_change_mw", "hours"], hours)
}

/// Attribution of demand increases and marginal technologies on the
/// baseline, at the first site of the first group.
fn write_history(bundle: &ScenarioBundle, year: &YearOutcome, cfg: &ExperimentConfig, regimes: Option<&RegimeModel>, out: &Path) -> Result<()> {
    let lead = &cfg.groups[0][0];
    let bus = bundle.case.bus_index(lead).ok_or_else(|| Error::UnknownBus(lead.clone()))?;
    let mut history = Vec::with_capacity(year.days.len());
    for d in &year.days {
        let min_lmp = d.features.min_lmp(lead).ok_or_else(|| Error::UnknownBus(lead.clone()))?;
        history.push(HistoryDay { dispatch: &d.baseline, min_lmp, regime: regimes.map(|m| m.classify(&d.features.gnd)) });
    }
    let rows = attribute_demand_increases(&bundle.case, &history);
    write_attribution_csv(&summarize_attribution(&rows), create(&out.join("attribution.csv"))?)?;
    write_marginal_csv(&marginal_tech_by_minlmp(&bundle.case, &history, bus), create(&out.join("marginal.csv"))?)?;
    if let Some(m) = regimes {
        let daily: Vec<_> = year
            .days
            .iter()
            .zip(&history)
            .map(|(d, h)| (d.date, m.classify(&d.features.gnd), h.min_lmp, d.baseline.curtailment.iter().flatten().sum::<f64>()))
            .collect();
        let found = derive_thresholds_from_history(&rows, &daily, &HistoryOptions::default())?;
        write_rows(
            &out.join("history_thresholds.csv"),
            &["regime", "threshold", "separation", "p_value", "diagnostic"],
            found.iter().map(|t| {
                vec![t.regime.name().into(), t.threshold.to_string(), t.separation.to_string(), t.p_value.to_string(), t.diagnostic.clone().unwrap_or_default()]
            }),
        )?;
    }
    Ok(())
}

fn export_dispatch(bundle: &ScenarioBundle, year: &YearOutcome, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    for d in &year.days {
        let day_dir = dir.join(d.date.to_string());
        let write = |name: &str, r: &DispatchResult| -> Result<()> {
            let run_dir = day_dir.join(name);
            out_dir(&run_dir)?;
            write_dispatch_csv(&bundle.case, r, create(&run_dir.join("generation.csv"))?)?;
            write_lmp_csv(&bundle.case, r, create(&run_dir.join("prices.csv"))?)
        };
        write("base", &d.baseline)?;
        for r in &d.runs {
            if let Some(dispatch) = &r.dispatch {
                write(&format!("{}-{}", group_label(&cfg.groups[r.group]), r.strategy), dispatch)?;
            }
        }
    }
    Ok(())
}

fn selected_groups(state: &RunState, nodes: &[String]) -> Result<Vec<usize>> {
    let nodes: Vec<String> = nodes.iter().map(|n| n.trim().to_owned()).filter(|n| !n.is_empty()).collect();
    if nodes.is_empty() {
        Ok((0..state.groups.len()).collect())
    } else {
        Ok(vec![state.group_index(&nodes)?])
    }
}

pub fn tune(args: &TuneArgs) -> Result<()> {
    let state = RunState::load(&args.out)?;
    let regimes = state.regimes.clone().ok_or_else(|| Error::Config("the run has no regime model; simulate at least 4 days".into()))?;
    let candidates = if args.strategy.is_empty() {
        RULE_CANDIDATES.iter().copied().filter(|s| state.strategies.contains(s)).collect()
    } else {
        let c = parse_strategies(&args.strategy)?;
        if let Some(s) = c.iter().find(|s| !state.strategies.contains(s) && **s != StrategyId::Base) {
            return Err(Error::Config(format!("strategy {s} was not simulated")));
        }
        c
    };
    let groups = selected_groups(&state, &args.nodes)?;
    if args.policy.is_some() && groups.len() != 1 {
        return Err(Error::Config("--policy needs exactly one node group; add --nodes".into()));
    }
    let mut opts = TuneOptions::new(candidates);
    opts.execution = Execution::from_jobs(args.jobs);
    let grid = default_threshold_grid();

    let (mut rules, mut totals) = (Vec::new(), Vec::new());
    for g in groups {
        let label = group_label(&state.groups[g]);
        let days = state.day_records(g)?;
        let report = tune_thresholds(&days, &opts)?;
        let cv = loocv(&days, &opts)?;
        let mut policy = report.policy(default_fallbacks());
        policy.regimes = Some(regimes.clone());
        let sens = sensitivity(&days, &policy, &grid, &grid)?;

        for q in &report.quadrants {
            rules.push(vec![
                label.clone(),
                q.regime.name().into(),
                q.rule.threshold.to_string(),
                q.rule.below.name().into(),
                q.rule.at_or_above.name().into(),
                q.days.to_string(),
                format!("{:.3}", q.savings_t / 1000.0),
            ]);
        }
        totals.push(vec![label.clone(), "cherry_pick".into(), format!("{:.3}", report.total_t / 1000.0)]);
        totals.push(vec![label.clone(), "loocv".into(), format!("{:.3}", cv.total_t / 1000.0)]);
        for (s, v) in &report.single_t {
            totals.push(vec![label.clone(), s.name().into(), format!("{:.3}", v / 1000.0)]);
        }

        let json = policy.to_json()?;
        let path = args.out.join(format!("policy_{label}.json"));
        fs::write(&path, &json).map_err(|e| Error::io(path.display().to_string(), e))?;
        if let Some(p) = &args.policy {
            fs::write(p, &json).map_err(|e| Error::io(p.display().to_string(), e))?;
        }
        let mut header = vec!["low_gnd\\high_gnd".to_owned()];
        header.extend(sens.high.iter().map(|t| t.to_string()));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = sens.low.iter().zip(&sens.savings_t).map(|(t, row)| {
            let mut r = vec![t.to_string()];
            r.extend(row.iter().map(|v| format!("{:.3}", v / 1000.0)));
            r
        });
        write_rows(&args.out.join(format!("sensitivity_{label}.csv")), &header, rows)?;

        let best = report.best_single().map_or("none".to_owned(), |(s, v)| format!("{s} {:.3}", v / 1000.0));
        println!(
            "{label}: cherry-pick {:.3} ktCO2, best single {best}, LOOCV {:.3}, threshold spread {:.1}%",
            report.total_t / 1000.0,
            cv.total_t / 1000.0,
            100.0 * sens.spread
        );
        for q in &report.quadrants {
            println!("  {}: {} below {}, {} at or above", q.regime, q.rule.below, q.rule.threshold, q.rule.at_or_above);
        }
    }
    write_rows(&args.out.join("tune.csv"), &["group", "regime", "threshold", "below", "at_or_above", "days", "co2_kt"], rules)?;
    write_rows(&args.out.join("tune_totals.csv"), &["group", "name", "co2_kt"], totals)
}

pub fn features(args: &FeatureArgs) -> Result<()> {
    let state = RunState::load(&args.out)?;
    let g = selected_groups(&state, &args.nodes)?[0];
    let records = state.day_records(g)?;
    let labels = match args.labels {
        LabelKind::Best => {
            let savings: Vec<_> = records.iter().map(|d| d.savings.clone()).collect();
            best_strategy_labels(&savings, &parse_strategies(&args.strategy)?)?
        }
        LabelKind::Rule | LabelKind::Median => {
            let min_lmp: Vec<f64> = records.iter().map(|d| d.min_lmp).collect();
            let regimes: Vec<Regime> = records.iter().map(|d| d.regime).collect();
            if args.labels == LabelKind::Rule {
                rule_labels(&min_lmp, &regimes, args.threshold)
            } else {
                median_rule_labels(&min_lmp, &regimes)
            }
        }
    };
    let days: Vec<LabeledDay> = state.days.iter().zip(labels).map(|(d, label)| LabeledDay { values: d.features.clone(), label }).collect();
    let cfg = ForestConfig { n_trees: args.trees, feature_rate: None, seed: args.seed, execution: Execution::from_jobs(args.jobs) };
    let forest = train_forest(&days, &cfg)?;
    let importance = feature_importance(&forest);
    let accuracy = cross_validate(&days, args.folds, &cfg)?;
    let majority = majority_rate(&days);

    write_importance_csv(&state.feature_names, &importance, create(&args.out.join("importance.csv"))?)?;
    let top: Vec<&str> = importance.iter().take(2).map(|(i, _)| state.feature_names[*i].as_str()).collect();
    write_rows(
        &args.out.join("features_cv.csv"),
        &["group", "labels", "days", "cv_accuracy", "majority_rate", "top1", "top2"],
        [vec![
            group_label(&state.groups[g]),
            format!("{:?}", args.labels).to_lowercase(),
            days.len().to_string(),
            accuracy.to_string(),
            majority.to_string(),
            top.first().copied().unwrap_or_default().into(),
            top.get(1).copied().unwrap_or_default().into(),
        ]],
    )?;
    println!("CV accuracy {:.3} vs majority {:.3}; top features {}", accuracy, majority, top.join(", "));
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let state = RunState::load(&args.out)?;
    let records = state.impact_records();
    let totals = yearly_summary(&records);
    write_summary_csv(&totals, create(&args.out.join("summary.csv"))?)?;

    let mut extra = Vec::new();
    if let Some(path) = &args.policy {
        let policy = read_policy(path)?;
        for g in 0..state.groups.len() {
            let (total, _) = evaluate_policy(&state.day_records(g)?, &policy)?;
            extra.push(("cherry_pick".to_owned(), group_label(&state.groups[g]), total));
        }
    }
    let text = render_summary(&totals, &extra);
    let path = args.out.join("report.txt");
    fs::write(&path, &text).map_err(|e| Error::io(path.display().to_string(), e))?;
    print!("{text}");

    // Cumulative savings through the year and monthly totals, per group and
    // strategy.
    let mut sorted: Vec<_> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.group, a.strategy.name(), a.date).cmp(&(&b.group, b.strategy.name(), b.date)));
    let mut cumulative = Vec::new();
    let mut running: BTreeMap<(String, StrategyId), f64> = BTreeMap::new();
    let mut monthly: BTreeMap<(String, &str, String), (f64, f64)> = BTreeMap::new();
    for r in sorted {
        let c = running.entry((r.group.clone(), r.strategy)).or_default();
        *c += r.co2_t;
        cumulative.push(vec![r.group.clone(), r.strategy.name().into(), r.date.to_string(), r.co2_t.to_string(), c.to_string()]);
        let m = monthly.entry((r.group.clone(), r.strategy.name(), r.date.format("%Y-%m").to_string())).or_default();
        m.0 += r.co2_t;
        m.1 += r.cost;
    }
    write_rows(&args.out.join("cumulative.csv"), &["group", "strategy", "date", "co2_t", "cumulative_co2_t"], cumulative)?;
    write_rows(
        &args.out.join("monthly.csv"),
        &["group", "strategy", "month", "co2_t", "cost"],
        monthly.into_iter().map(|((g, s, m), (co2, cost))| vec![g, s.into(), m, co2.to_string(), cost.to_string()]),
    )?;
    let mut w = create(&args.out.join("regimes.csv"))?;
    writeln!(w, "date,regime").map_err(|e| Error::io("regimes.csv", e))?;
    for d in &state.days {
        writeln!(w, "{},{}", d.date, d.regime.map_or("", |r| r.name())).map_err(|e| Error::io("regimes.csv", e))?;
    }
    w.flush().map_err(|e| Error::io("regimes.csv", e))
}
