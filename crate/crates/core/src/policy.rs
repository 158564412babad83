//! Daily strategy selection: GND regimes, the min(LMP) threshold rule and
//! its tuning.

use std::fmt;

use chrono::NaiveDate;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::{Technology, HOURS};
use crate::par::{map_ordered, Execution};
use crate::strategies::StrategyId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LowGnd,
    HighGnd,
}

impl Regime {
    pub const ALL: [Regime; 2] = [Regime::LowGnd, Regime::HighGnd];

    pub fn name(self) -> &'static str {
        match self {
            Regime::LowGnd => "low_gnd",
            Regime::HighGnd => "high_gnd",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const VARIANCE_KEPT: f64 = 0.9;
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 200;

/// PCA projection of daily GND profiles and a two-cluster k-means on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeModel {
    pub mean: Vec<f64>,
    /// Retained principal axes, each of length 24.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: f64,
    pub centroids: Vec<Vec<f64>>,
    /// Regime of each centroid.
    pub labels: Vec<Regime>,
    /// All profiles were identical; every day is [`Regime::LowGnd`].
    pub degenerate: bool,
}

impl RegimeModel {
    pub fn project(&self, profile: &[f64; HOURS]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(profile.iter().zip(&self.mean)).map(|(w, (x, m))| w * (x - m)).sum())
            .collect()
    }

    pub fn classify(&self, profile: &[f64; HOURS]) -> Regime {
        if self.degenerate {
            return Regime::LowGnd;
        }
        let p = self.project(profile);
        self.labels[nearest(&self.centroids, &p)]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = 0;
    for (i, c) in centroids.iter().enumerate().skip(1) {
        if sq_dist(c, p) < sq_dist(&centroids[best], p) {
            best = i;
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations; returns centroids,
/// assignment and inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>, f64) {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points.iter().map(|p| centroids.iter().map(|c| sq_dist(c, p)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, di) in d.iter().enumerate() {
                if r < *di {
                    pick = i;
                    break;
                }
                r -= di;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[next].clone());
    }
    let mut assign = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(&centroids, p);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&assign).filter(|(_, a)| **a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in centroid.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    let inertia = points.iter().zip(&assign).map(|(p, a)| sq_dist(p, &centroids[*a])).sum();
    (centroids, assign, inertia)
}

/// Fits the two GND regimes. The cluster whose member days have the larger
/// mean GND is the high regime.
pub fn fit_gnd_regimes(profiles: &[[f64; HOURS]], seed: u64) -> Result<RegimeModel> {
    const K: usize = 2;
    let n = profiles.len();
    if n < 2 * K {
        return Err(Error::Config(format!("regime fit needs at least {} days, got {n}", 2 * K)));
    }
    let mut mean = vec![0.0; HOURS];
    for p in profiles {
        for h in 0..HOURS {
            mean[h] += p[h] / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, HOURS, |i, j| profiles[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..HOURS).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let scale = mean.iter().map(|m| m * m).sum::<f64>().max(1.0);
    if total <= 1e-12 * scale {
        return Ok(RegimeModel {
            mean,
            components: Vec::new(),
            explained_variance: 0.0,
            centroids: Vec::new(),
            labels: Vec::new(),
            degenerate: true,
        });
    }
    let mut components = Vec::new();
    let mut kept = 0.0;
    for &i in &order {
        let mut axis: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let pivot = axis.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(axis);
        kept += eig.eigenvalues[i].max(0.0);
        if kept / total >= VARIANCE_KEPT {
            break;
        }
    }
    let mut model = RegimeModel {
        mean,
        components,
        explained_variance: kept / total,
        centroids: Vec::new(),
        labels: Vec::new(),
        degenerate: false,
    };
    let points: Vec<Vec<f64>> = profiles.iter().map(|p| model.project(p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<Vec<f64>>, Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = kmeans(&points, K, &mut rng);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (centroids, assign, _) = best.expect("at least one restart");
    let mut level = [0.0; K];
    let mut count = [0usize; K];
    for (p, a) in profiles.iter().zip(&assign) {
        level[*a] += p.iter().sum::<f64>();
        count[*a] += 1;
    }
    if count.contains(&0) {
        model.degenerate = true;
        return Ok(model);
    }
    let high = if level[1] / count[1] as f64 > level[0] / count[0] as f64 { 1 } else { 0 };
    model.labels = (0..K).map(|c| if c == high { Regime::HighGnd } else { Regime::LowGnd }).collect();
    model.centroids = centroids;
    Ok(model)
}

/// A min(LMP) threshold in $/MWh; `Unbounded` always takes the below branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Finite(f64),
    Unbounded,
}

impl Threshold {
    pub fn below(self, min_lmp: f64) -> bool {
        match self {
            Threshold::Finite(t) => min_lmp < t,
            Threshold::Unbounded => true,
        }
    }

    fn rank(self) -> f64 {
        match self {
            Threshold::Finite(t) => t,
            Threshold::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(t) => write!(f, "{t}"),
            Threshold::Unbounded => f.write_str("NA"),
        }
    }
}

/// Integers from -5 to 25 $/MWh, then `Unbounded`.
pub fn default_threshold_grid() -> Vec<Threshold> {
    (-5..=25).map(|t| Threshold::Finite(t as f64)).chain([Threshold::Unbounded]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadrantRule {
    pub threshold: Threshold,
    pub below: StrategyId,
    pub at_or_above: StrategyId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// The site's zone has (almost) no available wind and solar.
    NoRenewables,
    /// The wme feed is missing for the day.
    WmeMissing,
}

/// Replaces `strategy` by `replacement` when `condition` holds, optionally
/// only in one regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fallback {
    pub regime: Option<Regime>,
    pub strategy: StrategyId,
    pub condition: Condition,
    pub replacement: StrategyId,
}

/// The fallbacks of the cherry-picking rule: zws turns into lmp without
/// renewables, lmp in the high regime turns flat without renewables, and
/// wme turns flat without a feed.
pub fn default_fallbacks() -> Vec<Fallback> {
    vec![
        Fallback { regime: None, strategy: StrategyId::Zws, condition: Condition::NoRenewables, replacement: StrategyId::Lmp },
        Fallback {
            regime: Some(Regime::HighGnd),
            strategy: StrategyId::Lmp,
            condition: Condition::NoRenewables,
            replacement: StrategyId::Base,
        },
        Fallback { regime: None, strategy: StrategyId::Wme, condition: Condition::WmeMissing, replacement: StrategyId::Base },
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Availability {
    pub renewables: bool,
    pub wme: bool,
}

impl Availability {
    pub const ALL: Availability = Availability { renewables: true, wme: true };

    fn holds(self, c: Condition) -> bool {
        match c {
            Condition::NoRenewables => !self.renewables,
            Condition::WmeMissing => !self.wme,
        }
    }
}

fn apply_fallbacks(fallbacks: &[Fallback], regime: Regime, strategy: StrategyId, avail: Availability) -> StrategyId {
    fallbacks
        .iter()
        .find(|f| f.strategy == strategy && f.regime.is_none_or(|r| r == regime) && avail.holds(f.condition))
        .map_or(strategy, |f| f.replacement)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CherryPickPolicy {
    pub low_gnd: QuadrantRule,
    pub high_gnd: QuadrantRule,
    pub fallbacks: Vec<Fallback>,
    /// Regime classifier for new days, if fitted.
    #[serde(default)]
    pub regimes: Option<RegimeModel>,
}

impl CherryPickPolicy {
    /// The rule shape with lmp below the thresholds, zws above in the low
    /// regime and wme above in the high regime.
    pub fn with_thresholds(low: Threshold, high: Threshold) -> Self {
        Self {
            low_gnd: QuadrantRule { threshold: low, below: StrategyId::Lmp, at_or_above: StrategyId::Zws },
            high_gnd: QuadrantRule { threshold: high, below: StrategyId::Lmp, at_or_above: StrategyId::Wme },
            fallbacks: default_fallbacks(),
            regimes: None,
        }
    }

    /// Thresholds 10 (low GND) and 2 (high GND).
    pub fn tesla() -> Self {
        Self::with_thresholds(Threshold::Finite(10.0), Threshold::Finite(2.0))
    }

    /// Thresholds NA (low GND) and 18 (high GND).
    pub fn tylergnd() -> Self {
        Self::with_thresholds(Threshold::Unbounded, Threshold::Finite(18.0))
    }

    pub fn rule(&self, regime: Regime) -> &QuadrantRule {
        match regime {
            Regime::LowGnd => &self.low_gnd,
            Regime::HighGnd => &self.high_gnd,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("policy serialization: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("policy file: {e}")))
    }
}

/// The strategy the policy picks for a day.
pub fn pick_strategy(policy: &CherryPickPolicy, regime: Regime, min_lmp: f64, avail: Availability) -> StrategyId {
    let rule = policy.rule(regime);
    let s = if rule.threshold.below(min_lmp) { rule.below } else { rule.at_or_above };
    apply_fallbacks(&policy.fallbacks, regime, s, avail)
}

/// One day of simulated outcomes as the tuner sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub regime: Regime,
    pub min_lmp: f64,
    pub avail: Availability,
    /// tCO2 saved against the flat baseline per evaluated strategy.
    pub savings: Vec<(StrategyId, f64)>,
}

impl DayRecord {
    /// Savings of `s`; the flat baseline saves nothing by definition.
    pub fn saving(&self, s: StrategyId) -> Result<f64> {
        match self.savings.iter().find(|(id, _)| *id == s) {
            Some((_, v)) => Ok(*v),
            None if s == StrategyId::Base => Ok(0.0),
            None => Err(Error::Config(format!("{}: no result for strategy {s}", self.date))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadrantChoice {
    pub regime: Regime,
    pub rule: QuadrantRule,
    pub days: usize,
    pub savings_t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Loocv {
    pub total_t: f64,
    /// Per held-out day: the strategy chosen and its savings.
    pub selections: Vec<(NaiveDate, StrategyId, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sensitivity {
    pub low: Vec<Threshold>,
    pub high: Vec<Threshold>,
    /// `savings_t[i][j]` for `low[i]` and `high[j]`.
    pub savings_t: Vec<Vec<f64>>,
    /// (max - min) / |max| over the grid.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneReport {
    pub quadrants: Vec<QuadrantChoice>,
    pub total_t: f64,
    /// Yearly savings of every candidate used alone.
    pub single_t: Vec<(StrategyId, f64)>,
    pub loocv: Option<Loocv>,
    pub sensitivity: Option<Sensitivity>,
}

impl TuneReport {
    pub fn policy(&self, fallbacks: Vec<Fallback>) -> CherryPickPolicy {
        let rule = |r: Regime| {
            self.quadrants.iter().find(|q| q.regime == r).map(|q| q.rule).unwrap_or(QuadrantRule {
                threshold: Threshold::Unbounded,
                below: StrategyId::Base,
                at_or_above: StrategyId::Base,
            })
        };
        CherryPickPolicy { low_gnd: rule(Regime::LowGnd), high_gnd: rule(Regime::HighGnd), fallbacks, regimes: None }
    }

    pub fn best_single(&self) -> Option<(StrategyId, f64)> {
        self.single_t.iter().copied().fold(None, |b, x| match b {
            Some(b) if b.1 >= x.1 => Some(b),
            _ => Some(x),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TuneOptions {
    pub candidates: Vec<StrategyId>,
    pub grid: Vec<Threshold>,
    pub fallbacks: Vec<Fallback>,
    pub execution: Execution,
}

impl TuneOptions {
    pub fn new(candidates: Vec<StrategyId>) -> Self {
        Self { candidates, grid: default_threshold_grid(), fallbacks: default_fallbacks(), execution: Execution::Sequential }
    }

    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("threshold grid is empty".into()));
        }
        if self.candidates.is_empty() {
            return Err(Error::Config("no candidate strategies".into()));
        }
        Ok(())
    }

    /// Candidate pairs in lexicographic order of strategy names.
    fn pairs(&self) -> Vec<(StrategyId, StrategyId)> {
        let mut c = self.candidates.clone();
        c.sort_by_key(|s| s.name());
        c.dedup();
        let mut out = Vec::new();
        for &a in &c {
            for &b in &c {
                out.push((a, b));
            }
        }
        out
    }
}

fn rule_savings(days: &[&DayRecord], rule: &QuadrantRule, regime: Regime, fallbacks: &[Fallback]) -> Result<f64> {
    let mut total = 0.0;
    for d in days {
        let s = if rule.threshold.below(d.min_lmp) { rule.below } else { rule.at_or_above };
        total += d.saving(apply_fallbacks(fallbacks, regime, s, d.avail))?;
    }
    Ok(total)
}

/// Best rule for the days of one regime: thresholds in grid order, pairs
/// lexicographic, first maximum kept.
fn tune_regime(days: &[&DayRecord], regime: Regime, opts: &TuneOptions, pairs: &[(StrategyId, StrategyId)]) -> Result<QuadrantChoice> {
    let mut grid = opts.grid.clone();
    grid.sort_by(|a, b| a.rank().total_cmp(&b.rank()));
    let mut best: Option<QuadrantChoice> = None;
    for &threshold in &grid {
        for &(below, at_or_above) in pairs {
            let rule = QuadrantRule { threshold, below, at_or_above };
            let v = rule_savings(days, &rule, regime, &opts.fallbacks)?;
            if best.as_ref().is_none_or(|b| v > b.savings_t) {
                best = Some(QuadrantChoice { regime, rule, days: days.len(), savings_t: v });
            }
        }
    }
    Ok(best.expect("non-empty grid and pairs"))
}

/// Sweeps thresholds and strategy pairs per regime for the largest total
/// savings.
pub fn tune_thresholds(days: &[DayRecord], opts: &TuneOptions) -> Result<TuneReport> {
    opts.validate()?;
    let pairs = opts.pairs();
    let mut quadrants = Vec::new();
    let mut total = 0.0;
    for regime in Regime::ALL {
        let sub: Vec<&DayRecord> = days.iter().filter(|d| d.regime == regime).collect();
        let q = tune_regime(&sub, regime, opts, &pairs)?;
        total += q.savings_t;
        quadrants.push(q);
    }
    let mut single_t = Vec::new();
    for &s in &opts.candidates {
        let mut v = 0.0;
        for d in days {
            v += d.saving(s)?;
        }
        single_t.push((s, v));
    }
    Ok(TuneReport { quadrants, total_t: total, single_t, loocv: None, sensitivity: None })
}

/// Leave-one-out: every day is scored by the rule tuned on all other days.
pub fn loocv(days: &[DayRecord], opts: &TuneOptions) -> Result<Loocv> {
    opts.validate()?;
    let pairs = opts.pairs();
    let idx: Vec<usize> = (0..days.len()).collect();
    let folds = map_ordered(opts.execution, &idx, |&i| -> Result<(NaiveDate, StrategyId, f64)> {
        let d = &days[i];
        let train: Vec<&DayRecord> = days.iter().enumerate().filter(|(j, o)| *j != i && o.regime == d.regime).map(|(_, o)| o).collect();
        let q = tune_regime(&train, d.regime, opts, &pairs)?;
        let s = if q.rule.threshold.below(d.min_lmp) { q.rule.below } else { q.rule.at_or_above };
        let s = apply_fallbacks(&opts.fallbacks, d.regime, s, d.avail);
        Ok((d.date, s, d.saving(s)?))
    });
    let mut selections = Vec::with_capacity(days.len());
    let mut total = 0.0;
    for f in folds {
        let f = f?;
        total += f.2;
        selections.push(f);
    }
    Ok(Loocv { total_t: total, selections })
}

/// Savings of `policy` with its strategies fixed over a grid of threshold
/// pairs.
pub fn sensitivity(days: &[DayRecord], policy: &CherryPickPolicy, low: &[Threshold], high: &[Threshold]) -> Result<Sensitivity> {
    if low.is_empty() || high.is_empty() {
        return Err(Error::Config("sensitivity grid is empty".into()));
    }
    let by = |r: Regime| -> Vec<&DayRecord> { days.iter().filter(|d| d.regime == r).collect() };
    let (lo_days, hi_days) = (by(Regime::LowGnd), by(Regime::HighGnd));
    let mut lo_v = Vec::new();
    for &t in low {
        lo_v.push(rule_savings(&lo_days, &QuadrantRule { threshold: t, ..policy.low_gnd }, Regime::LowGnd, &policy.fallbacks)?);
    }
    let mut hi_v = Vec::new();
    for &t in high {
        hi_v.push(rule_savings(&hi_days, &QuadrantRule { threshold: t, ..policy.high_gnd }, Regime::HighGnd, &policy.fallbacks)?);
    }
    let savings_t: Vec<Vec<f64>> = lo_v.iter().map(|a| hi_v.iter().map(|b| a + b).collect()).collect();
    let flat = savings_t.iter().flatten();
    let max = flat.clone().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = flat.copied().fold(f64::INFINITY, f64::min);
    let spread = if max.abs() > 0.0 { (max - min) / max.abs() } else { 0.0 };
    Ok(Sensitivity { low: low.to_vec(), high: high.to_vec(), savings_t, spread })
}

/// Total savings of applying `policy` to every day, with the picks.
pub fn evaluate_policy(days: &[DayRecord], policy: &CherryPickPolicy) -> Result<(f64, Vec<(NaiveDate, StrategyId)>)> {
    let mut total = 0.0;
    let mut picks = Vec::with_capacity(days.len());
    for d in days {
        let s = pick_strategy(policy, d.regime, d.min_lmp, d.avail);
        total += d.saving(s)?;
        picks.push((d.date, s));
    }
    Ok((total, picks))
}

/// Hour-level record of which technologies served a rise in grid demand.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionRow {
    pub date: NaiveDate,
    pub hour: usize,
    /// Grid demand increase over the previous hour in MW.
    pub increase_mw: f64,
    /// Share of the positive dispatch increases per technology.
    pub shares: Vec<(Technology, f64)>,
    /// Curtailed wind and solar in the hour, MWh.
    pub curtailment_mwh: f64,
    /// The day's min(LMP) at the flexible bus.
    pub min_lmp: f64,
    pub regime: Option<Regime>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryThreshold {
    pub regime: Regime,
    pub threshold: Threshold,
    /// Non-coal share of contributions below minus above the threshold.
    pub separation: f64,
    pub p_value: f64,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug)]
pub struct HistoryOptions {
    pub grid: Vec<Threshold>,
    pub alpha: f64,
    /// Mean daily curtailment above the threshold may be at most this share
    /// of the mean over all days.
    pub max_curtailment_share: f64,
}

impl Default for HistoryOptions {
    fn default() -> Self {
        Self {
            grid: (-5..=25).map(|t| Threshold::Finite(t as f64)).collect(),
            alpha: 0.05,
            max_curtailment_share: 0.05,
        }
    }
}

/// Non-coal and coal contribution counts: every technology with a positive
/// share in an increase hour is one contribution.
fn contribution_counts<'r>(rows: impl Iterator<Item = &'r AttributionRow>) -> (f64, f64) {
    let (mut non_coal, mut coal) = (0.0, 0.0);
    for r in rows {
        for (t, s) in &r.shares {
            if *s <= 0.0 {
                continue;
            }
            if *t == Technology::Coal {
                coal += 1.0;
            } else if t.is_intermittent() || t.is_gas() {
                non_coal += 1.0;
            }
        }
    }
    (non_coal, coal)
}

/// Two-proportion z-test, one-sided for `p1 > p2`.
fn two_proportion(x1: f64, n1: f64, x2: f64, n2: f64) -> f64 {
    if n1 == 0.0 || n2 == 0.0 {
        return 1.0;
    }
    let pooled = (x1 + x2) / (n1 + n2);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
    let diff = x1 / n1 - x2 / n2;
    if se == 0.0 {
        return if diff > 0.0 { 0.0 } else { 1.0 };
    }
    let normal = Normal::standard();
    1.0 - normal.cdf(diff / se)
}

/// Picks, per regime, the threshold splitting days where non-coal
/// technologies supply demand increases clearly more often below than above
/// it, with (almost) no curtailment above it. `daily_curtailment` holds
/// per-day curtailed MWh and min(LMP).
pub fn derive_thresholds_from_history(
    rows: &[AttributionRow],
    daily: &[(NaiveDate, Regime, f64, f64)],
    opts: &HistoryOptions,
) -> Result<Vec<HistoryThreshold>> {
    if opts.grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    let mut grid = opts.grid.clone();
    grid.sort_by(|a, b| a.rank().total_cmp(&b.rank()));
    let mut out = Vec::new();
    for regime in Regime::ALL {
        let rs: Vec<&AttributionRow> = rows.iter().filter(|r| r.regime == Some(regime)).collect();
        let days: Vec<&(NaiveDate, Regime, f64, f64)> = daily.iter().filter(|d| d.1 == regime).collect();
        let mean_all = if days.is_empty() { 0.0 } else { days.iter().map(|d| d.3).sum::<f64>() / days.len() as f64 };
        let mut best: Option<HistoryThreshold> = None;
        let mut last_reason = String::from("no threshold separates days significantly with negligible curtailment above it");
        for &t in &grid {
            let (nb, cb) = contribution_counts(rs.iter().copied().filter(|r| t.below(r.min_lmp)));
            let (na, ca) = contribution_counts(rs.iter().copied().filter(|r| !t.below(r.min_lmp)));
            if nb + cb == 0.0 || na + ca == 0.0 {
                continue;
            }
            if cb + ca == 0.0 {
                last_reason = "no coal contributions to separate".into();
                break;
            }
            let above: Vec<f64> = days.iter().filter(|d| !t.below(d.2)).map(|d| d.3).collect();
            let mean_above = if above.is_empty() { 0.0 } else { above.iter().sum::<f64>() / above.len() as f64 };
            if mean_above > opts.max_curtailment_share * mean_all {
                continue;
            }
            let separation = nb / (nb + cb) - na / (na + ca);
            let p_value = two_proportion(nb, nb + cb, na, na + ca);
            if p_value >= opts.alpha || separation <= 0.0 {
                continue;
            }
            if best.as_ref().is_none_or(|b| separation > b.separation) {
                best = Some(HistoryThreshold { regime, threshold: t, separation, p_value, diagnostic: None });
            }
        }
        out.push(best.unwrap_or(HistoryThreshold {
            regime,
            threshold: Threshold::Unbounded,
            separation: 0.0,
            p_value: 1.0,
            diagnostic: Some(last_reason),
        }));
    }
    Ok(out)
}
