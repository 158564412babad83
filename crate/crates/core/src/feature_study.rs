//! Random forest of decision stumps over daily features, used to see which
//! observables predict the best strategy of a day.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{map_ordered, Execution};
use crate::policy::Regime;
use crate::signals::DayFeatures;
use crate::strategies::StrategyId;

pub const DEFAULT_TREES: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDay {
    pub values: Vec<f64>,
    pub label: StrategyId,
}

/// Feature names and labeled vectors from daily features.
pub fn labeled_days(features: &[DayFeatures], labels: &[StrategyId]) -> Result<(Vec<String>, Vec<LabeledDay>)> {
    if features.len() != labels.len() {
        return Err(Error::Config(format!("{} feature rows but {} labels", features.len(), labels.len())));
    }
    let mut names = Vec::new();
    let mut days = Vec::with_capacity(features.len());
    for (f, &label) in features.iter().zip(labels) {
        let (n, values) = f.to_vector();
        if names.is_empty() {
            names = n;
        } else if names != n {
            return Err(Error::Config(format!("{}: feature set differs from the first day", f.date)));
        }
        days.push(LabeledDay { values, label });
    }
    Ok((names, days))
}

/// The strategy with the largest savings among `candidates` each day; ties go
/// to the earlier candidate.
pub fn best_strategy_labels(savings: &[Vec<(StrategyId, f64)>], candidates: &[StrategyId]) -> Result<Vec<StrategyId>> {
    savings
        .iter()
        .map(|day| {
            let mut best: Option<(StrategyId, f64)> = None;
            for &c in candidates {
                let v = day.iter().find(|(s, _)| *s == c).map(|(_, v)| *v).ok_or(Error::Config(format!("no result for {c}")))?;
                if best.is_none_or(|b| v > b.1) {
                    best = Some((c, v));
                }
            }
            best.map(|b| b.0).ok_or_else(|| Error::Config("no candidates".into()))
        })
        .collect()
}

/// Labels following the threshold rule: lmp below `threshold`, otherwise
/// zws in the low and wme in the high GND regime.
pub fn rule_labels(min_lmp: &[f64], regimes: &[Regime], threshold: f64) -> Vec<StrategyId> {
    min_lmp
        .iter()
        .zip(regimes)
        .map(|(&m, r)| match (m < threshold, r) {
            (true, _) => StrategyId::Lmp,
            (false, Regime::LowGnd) => StrategyId::Zws,
            (false, Regime::HighGnd) => StrategyId::Wme,
        })
        .collect()
}

/// [`rule_labels`] with a per-regime threshold at the regime's median
/// min(LMP), so both branches get about half of the days.
pub fn median_rule_labels(min_lmp: &[f64], regimes: &[Regime]) -> Vec<StrategyId> {
    let median = |r: Regime| {
        let mut v: Vec<f64> = min_lmp.iter().zip(regimes).filter(|(_, g)| **g == r).map(|(m, _)| *m).collect();
        v.sort_by(f64::total_cmp);
        v.get(v.len() / 2).copied().unwrap_or(f64::INFINITY)
    };
    let (low, high) = (median(Regime::LowGnd), median(Regime::HighGnd));
    min_lmp
        .iter()
        .zip(regimes)
        .map(|(&m, &r)| {
            let t = if r == Regime::LowGnd { low } else { high };
            rule_labels(&[m], &[r], t)[0]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stump {
    /// `None` for a single leaf.
    pub feature: Option<usize>,
    pub split: f64,
    /// Class counts of the bootstrap sample going left (`value <= split`)
    /// and right.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Sample-weighted Gini decrease.
    pub gain: f64,
}

impl Stump {
    fn predict(&self, x: &[f64]) -> usize {
        let counts = match self.feature {
            Some(f) if x[f] > self.split => &self.right,
            _ => &self.left,
        };
        argmax(counts)
    }
}

fn argmax(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    best
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StumpForest {
    /// Class ids in name order; stump counts index into this.
    pub classes: Vec<StrategyId>,
    pub n_features: usize,
    pub feature_rate: f64,
    pub seed: u64,
    pub stumps: Vec<Stump>,
    /// Only one class was present.
    pub degenerate: bool,
}

impl StumpForest {
    /// Majority vote; ties go to the class listed first.
    pub fn predict(&self, x: &[f64]) -> StrategyId {
        let mut votes = vec![0usize; self.classes.len()];
        for s in &self.stumps {
            votes[s.predict(x)] += 1;
        }
        self.classes[argmax(&votes)]
    }

    pub fn accuracy(&self, days: &[LabeledDay]) -> f64 {
        if days.is_empty() {
            return 0.0;
        }
        days.iter().filter(|d| self.predict(&d.values) == d.label).count() as f64 / days.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Share of features offered to each stump; `None` for sqrt(F)/F.
    pub feature_rate: Option<f64>,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: DEFAULT_TREES, feature_rate: None, seed: 1, execution: Execution::Sequential }
    }
}

fn train_stump(days: &[LabeledDay], class_of: &[usize], n_classes: usize, features: &[usize]) -> Stump {
    let n = days.len();
    let mut total = vec![0usize; n_classes];
    for &c in class_of {
        total[c] += 1;
    }
    let parent = gini(&total, n);
    let mut best = Stump { feature: None, split: 0.0, left: total.clone(), right: vec![0; n_classes], gain: 0.0 };
    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    for &f in &sorted_features {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| days[a].values[f].total_cmp(&days[b].values[f]).then(a.cmp(&b)));
        let mut left = vec![0usize; n_classes];
        for k in 0..n - 1 {
            left[class_of[order[k]]] += 1;
            let (v, next) = (days[order[k]].values[f], days[order[k + 1]].values[f]);
            if v == next {
                continue;
            }
            let nl = k + 1;
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let child = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
            let gain = (parent - child) * n as f64;
            if gain > best.gain + 1e-12 {
                best = Stump { feature: Some(f), split: 0.5 * (v + next), left: left.clone(), right, gain };
            }
        }
    }
    best
}

/// Trains `n_trees` stumps, each on a bootstrap sample and a random feature
/// subset, split by Gini impurity.
pub fn train_forest(days: &[LabeledDay], cfg: &ForestConfig) -> Result<StumpForest> {
    if days.len() < 10 {
        return Err(Error::Config(format!("forest needs at least 10 days, got {}", days.len())));
    }
    if cfg.n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let n_features = days[0].values.len();
    if n_features == 0 || days.iter().any(|d| d.values.len() != n_features) {
        return Err(Error::Config("every day needs the same non-empty feature vector".into()));
    }
    if days.iter().flat_map(|d| &d.values).any(|v| !v.is_finite()) {
        return Err(Error::Config("features must be finite".into()));
    }
    let mut classes: Vec<StrategyId> = days.iter().map(|d| d.label).collect();
    classes.sort_by_key(|c| c.name());
    classes.dedup();
    let rate = cfg.feature_rate.unwrap_or((n_features as f64).sqrt() / n_features as f64);
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config(format!("feature rate must be in (0, 1], got {rate}")));
    }
    let degenerate = classes.len() < 2;
    let m = ((rate * n_features as f64).round() as usize).clamp(1, n_features);
    let class_index = |s: StrategyId| classes.iter().position(|c| *c == s).expect("known class");
    let trees: Vec<usize> = (0..cfg.n_trees).collect();
    let stumps = map_ordered(cfg.execution, &trees, |&t| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(t as u64);
        let boot: Vec<LabeledDay> = (0..days.len()).map(|_| days[rng.random_range(0..days.len())].clone()).collect();
        let features = sample(&mut rng, n_features, m).into_vec();
        let class_of: Vec<usize> = boot.iter().map(|d| class_index(d.label)).collect();
        train_stump(&boot, &class_of, classes.len(), &features)
    });
    Ok(StumpForest { classes, n_features, feature_rate: rate, seed: cfg.seed, stumps, degenerate })
}

/// Mean validation accuracy over `k` seeded folds.
pub fn cross_validate(days: &[LabeledDay], k: usize, cfg: &ForestConfig) -> Result<f64> {
    if k < 2 || k > days.len() {
        return Err(Error::Config(format!("cannot split {} days into {k} folds", days.len())));
    }
    let mut order: Vec<usize> = (0..days.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut total = 0.0;
    for fold in 0..k {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (pos, &i) in order.iter().enumerate() {
            if pos % k == fold {
                test.push(days[i].clone());
            } else {
                train.push(days[i].clone());
            }
        }
        let forest = train_forest(&train, cfg)?;
        total += forest.accuracy(&test);
    }
    Ok(total / k as f64)
}

/// Share of the most frequent label.
pub fn majority_rate(days: &[LabeledDay]) -> f64 {
    let mut labels: Vec<&str> = days.iter().map(|d| d.label.name()).collect();
    labels.sort_unstable();
    let mut best = 0;
    let mut run = 0;
    for i in 0..labels.len() {
        run = if i > 0 && labels[i] == labels[i - 1] { run + 1 } else { 1 };
        best = best.max(run);
    }
    if days.is_empty() {
        0.0
    } else {
        best as f64 / days.len() as f64
    }
}

/// Mean impurity decrease per feature, normalized to sum to one, descending;
/// ties by feature index. A forest without any split spreads evenly.
pub fn feature_importance(forest: &StumpForest) -> Vec<(usize, f64)> {
    let mut sums = vec![0.0; forest.n_features];
    for s in &forest.stumps {
        if let Some(f) = s.feature {
            sums[f] += s.gain;
        }
    }
    let total: f64 = sums.iter().sum();
    let mut out: Vec<(usize, f64)> = if total > 0.0 {
        sums.iter().enumerate().map(|(i, v)| (i, v / total)).collect()
    } else {
        (0..forest.n_features).map(|i| (i, 1.0 / forest.n_features as f64)).collect()
    };
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

pub fn write_importance_csv<W: std::io::Write>(names: &[String], importance: &[(usize, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::io("writing importance CSV", e.into());
    w.write_record(["rank", "feature", "importance"]).map_err(err)?;
    for (rank, (i, v)) in importance.iter().enumerate() {
        let name = names.get(*i).cloned().unwrap_or_else(|| format!("f{i}"));
        w.write_record([(rank + 1).to_string(), name, v.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("writing importance CSV", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> Vec<LabeledDay> {
        (0..n)
            .map(|i| LabeledDay {
                values: vec![i as f64, ((i * 7) % 5) as f64],
                label: if i < n / 2 { StrategyId::Lmp } else { StrategyId::Wme },
            })
            .collect()
    }

    #[test]
    fn separable_feature_is_learned() {
        let days = separable(40);
        let f = train_forest(&days, &ForestConfig { feature_rate: Some(1.0), ..Default::default() }).unwrap();
        assert_eq!(f.accuracy(&days), 1.0);
        assert_eq!(feature_importance(&f)[0].0, 0);
    }

    #[test]
    fn importance_sums_to_one() {
        let f = train_forest(&separable(30), &ForestConfig { n_trees: 25, ..Default::default() }).unwrap();
        let s: f64 = feature_importance(&f).iter().map(|x| x.1).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_degenerate() {
        let days: Vec<LabeledDay> = (0..12).map(|i| LabeledDay { values: vec![i as f64], label: StrategyId::Lmp }).collect();
        let f = train_forest(&days, &ForestConfig { n_trees: 5, ..Default::default() }).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.predict(&[3.0]), StrategyId::Lmp);
    }

    #[test]
    fn too_many_folds() {
        assert!(cross_validate(&separable(12), 13, &ForestConfig::default()).is_err());
    }

    #[test]
    fn majority() {
        let mut d = separable(10);
        d[5].label = StrategyId::Lmp;
        assert_eq!(majority_rate(&d), 0.6);
    }
}
