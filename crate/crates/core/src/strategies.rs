//! Turning signals into admissible load shapes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dispatch::{co_optimize_benchmark, BenchmarkConfig, DayModel, DispatchResult, SlotResponses};
use crate::error::{Error, Result};
use crate::grid::{FlexLoadSpec, Level, LoadShape, NodeSchedule, HOURS};
use crate::signals::{SignalId, SignalVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyId {
    Avg,
    Base,
    Cfeg,
    Overnight,
    Lme,
    Lmp,
    Ws,
    Wme,
    Zws,
    Opt,
}

impl StrategyId {
    pub const ALL: [StrategyId; 10] = [
        StrategyId::Avg,
        StrategyId::Base,
        StrategyId::Cfeg,
        StrategyId::Overnight,
        StrategyId::Lme,
        StrategyId::Lmp,
        StrategyId::Ws,
        StrategyId::Wme,
        StrategyId::Zws,
        StrategyId::Opt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::Avg => "avg",
            StrategyId::Base => "base",
            StrategyId::Cfeg => "cfeg",
            StrategyId::Overnight => "overnight",
            StrategyId::Lme => "lme",
            StrategyId::Lmp => "lmp",
            StrategyId::Ws => "ws",
            StrategyId::Wme => "wme",
            StrategyId::Zws => "zws",
            StrategyId::Opt => "opt",
        }
    }

    /// The signal a strategy ranks hours by, if any.
    pub fn signal(self) -> Option<SignalId> {
        match self {
            StrategyId::Avg => Some(SignalId::AvgCi),
            StrategyId::Cfeg => Some(SignalId::Cfeg),
            StrategyId::Lme => Some(SignalId::Lme),
            StrategyId::Lmp => Some(SignalId::Lmp),
            StrategyId::Ws => Some(SignalId::Ws),
            StrategyId::Wme => Some(SignalId::Wme),
            StrategyId::Zws => Some(SignalId::Zws),
            StrategyId::Base | StrategyId::Overnight | StrategyId::Opt => None,
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapePlan {
    pub strategy: StrategyId,
    pub shape: LoadShape,
    /// Signals the shape was ranked on, one per shaped node.
    pub signals: Vec<SignalVector>,
}

/// Ranks hours by the signal in its orientation: the `hours_up` best hours
/// get `base + delta`, the `hours_down` worst `base - delta`. Ties go to the
/// earlier hour.
pub fn shape_from_signal(signal: &SignalVector, spec: &FlexLoadSpec) -> Result<LoadShape> {
    spec.validate()?;
    Ok(LoadShape::from_ranking(std::slice::from_ref(spec), &[signal.load_score()], spec.hours_up, spec.hours_down)?)
}

/// Sheds from noon to 9pm and adds load from 10pm to 7am.
pub fn overnight_shape(spec: &FlexLoadSpec) -> Result<LoadShape> {
    spec.validate()?;
    if spec.hours_up != 9 || spec.hours_down != 9 {
        return Err(Error::Config(format!("overnight shape needs 9 up and 9 down hours, {} has {}/{}", spec.bus, spec.hours_up, spec.hours_down)));
    }
    let mut mw = [spec.base; HOURS];
    for (h, v) in mw.iter_mut().enumerate() {
        *v = match h {
            12..=20 => spec.base - spec.delta,
            22 | 23 | 0..=6 => spec.base + spec.delta,
            _ => spec.base,
        };
    }
    Ok(LoadShape::new(vec![NodeSchedule { spec: spec.clone(), mw }])?)
}

/// Ranks all (node, hour) slots of two nodes together; the best
/// `hours_up` sum get `+delta`, the worst `hours_down` sum `-delta`.
/// Ties go to the earlier hour, then the lower node index.
pub fn two_node_shape(signals: [&SignalVector; 2], specs: [&FlexLoadSpec; 2]) -> Result<LoadShape> {
    if signals[0].id != signals[1].id {
        return Err(Error::Config(format!("two-node shaping needs one signal, got {} and {}", signals[0].id, signals[1].id)));
    }
    for s in specs {
        s.validate()?;
    }
    let specs = [specs[0].clone(), specs[1].clone()];
    let score = [signals[0].load_score(), signals[1].load_score()];
    let n_up = specs[0].hours_up + specs[1].hours_up;
    let n_down = specs[0].hours_down + specs[1].hours_down;
    Ok(LoadShape::from_ranking(&specs, &score, n_up, n_down)?)
}

/// Signals available to a day's planning, looked up by id and scope.
#[derive(Clone, Debug, Default)]
pub struct SignalBundle {
    signals: Vec<SignalVector>,
}

impl SignalBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, s: SignalVector) {
        self.signals.retain(|x| !(x.id == s.id && x.scope == s.scope));
        self.signals.push(s);
    }

    /// The signal `id` as seen from `bus`: bus-scoped first, then any scope.
    pub fn for_node(&self, id: SignalId, bus: &str) -> Option<&SignalVector> {
        self.signals
            .iter()
            .find(|s| s.id == id && s.scope == bus)
            .or_else(|| self.signals.iter().find(|s| s.id == id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &SignalVector> {
        self.signals.iter()
    }
}

/// What `opt` needs to run the benchmark.
pub struct BenchmarkContext<'m, 'a> {
    pub model: &'m DayModel<'a>,
    /// Dispatch with every flexible load flat.
    pub baseline: Option<&'m DispatchResult>,
    /// Extra candidate shapes of the shaped nodes.
    pub seeds: Vec<LoadShape>,
    pub responses: Option<SlotResponses>,
}

impl<'m, 'a> BenchmarkContext<'m, 'a> {
    pub fn new(model: &'m DayModel<'a>, baseline: Option<&'m DispatchResult>) -> Self {
        Self { model, baseline, seeds: Vec::new(), responses: None }
    }

    pub fn config(&self, specs: &[FlexLoadSpec], fixed: &[FlexLoadSpec]) -> BenchmarkConfig {
        let mut cfg = BenchmarkConfig::new(specs.to_vec(), fixed.to_vec());
        cfg.seeds = self.seeds.clone();
        cfg.responses = self.responses.clone();
        cfg
    }
}

/// Produces the shape of `strategy` for the shaped nodes `specs` (one or
/// two), with the `fixed` loads flat. The returned shape lists the shaped
/// nodes first.
pub fn plan_day(
    strategy: StrategyId,
    signals: &SignalBundle,
    specs: &[FlexLoadSpec],
    fixed: &[FlexLoadSpec],
    bench: Option<&BenchmarkContext<'_, '_>>,
) -> Result<ShapePlan> {
    if specs.is_empty() || specs.len() > 2 {
        return Err(Error::Config(format!("a plan shapes one or two nodes, got {}", specs.len())));
    }
    let mut used = Vec::new();
    let shaped: LoadShape = match strategy {
        StrategyId::Base => LoadShape::flat(specs)?,
        StrategyId::Overnight => {
            let mut nodes = Vec::new();
            for s in specs {
                nodes.extend(overnight_shape(s)?.nodes().iter().cloned());
            }
            LoadShape::new(nodes)?
        }
        StrategyId::Opt => {
            let ctx = bench.ok_or_else(|| Error::Config("opt needs a day model".into()))?;
            let out = co_optimize_benchmark(ctx.model, ctx.baseline, &ctx.config(specs, fixed))?;
            return Ok(ShapePlan { strategy, shape: out.shape, signals: used });
        }
        _ => {
            let id = strategy.signal().expect("signal strategy");
            for s in specs {
                used.push(signals.for_node(id, &s.bus).ok_or(Error::MissingSignal(id))?.clone());
            }
            if specs.len() == 1 {
                shape_from_signal(&used[0], &specs[0])?
            } else {
                two_node_shape([&used[0], &used[1]], [&specs[0], &specs[1]])?
            }
        }
    };
    let mut nodes = shaped.nodes().to_vec();
    nodes.extend(LoadShape::flat(fixed).map(|f| f.nodes().to_vec()).unwrap_or_default());
    Ok(ShapePlan { strategy, shape: LoadShape::new(nodes)?, signals: used })
}

/// Levels of a shape per node, for reporting.
pub fn levels_of(shape: &LoadShape) -> Vec<[Level; HOURS]> {
    shape
        .nodes()
        .iter()
        .map(|n| {
            let mut lv = [Level::Flat; HOURS];
            for (h, l) in lv.iter_mut().enumerate() {
                *l = n.level(h);
            }
            lv
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(id: SignalId, values: [f64; HOURS]) -> SignalVector {
        SignalVector::new(id, "a", values).unwrap()
    }

    fn increasing() -> [f64; HOURS] {
        let mut v = [0.0; HOURS];
        for (h, x) in v.iter_mut().enumerate() {
            *x = h as f64;
        }
        v
    }

    #[test]
    fn constant_signal_follows_tie_order() {
        let shape = shape_from_signal(&sig(SignalId::Lmp, [7.0; HOURS]), &FlexLoadSpec::new("a")).unwrap();
        let mw = shape.nodes()[0].mw;
        assert!(mw[..9].iter().all(|&v| v == 480));
        assert!(mw[9..15].iter().all(|&v| v == 400));
        assert!(mw[15..].iter().all(|&v| v == 320));
    }

    #[test]
    fn increasing_lmp_loads_early_hours() {
        let shape = shape_from_signal(&sig(SignalId::Lmp, increasing()), &FlexLoadSpec::new("a")).unwrap();
        let mw = shape.nodes()[0].mw;
        assert!(mw[..9].iter().all(|&v| v == 480));
        assert!(mw[15..].iter().all(|&v| v == 320));
        // A load-where-high signal mirrors it.
        let shape = shape_from_signal(&sig(SignalId::Ws, increasing()), &FlexLoadSpec::new("a")).unwrap();
        let mw = shape.nodes()[0].mw;
        assert!(mw[..9].iter().all(|&v| v == 320));
        assert!(mw[15..].iter().all(|&v| v == 480));
    }

    #[test]
    fn overnight_hours() {
        let shape = overnight_shape(&FlexLoadSpec::new("a")).unwrap();
        let mw = shape.nodes()[0].mw;
        assert_eq!(mw[13], 320);
        assert_eq!(mw[2], 480);
        assert_eq!(mw[21], 400);
        assert_eq!(mw.iter().sum::<i64>(), 9600);
    }

    #[test]
    fn two_node_constant_signal_tie_order() {
        let (a, b) = (FlexLoadSpec::new("a"), FlexLoadSpec::new("b"));
        let s = sig(SignalId::Lmp, [1.0; HOURS]);
        let shape = two_node_shape([&s, &s], [&a, &b]).unwrap();
        // Hour-major ties: both nodes get the single-node constant shape.
        for n in shape.nodes() {
            assert!(n.mw[..9].iter().all(|&v| v == 480));
            assert!(n.mw[9..15].iter().all(|&v| v == 400));
            assert!(n.mw[15..].iter().all(|&v| v == 320));
        }
    }

    #[test]
    fn two_node_rejects_mixed_signals() {
        let (a, b) = (FlexLoadSpec::new("a"), FlexLoadSpec::new("b"));
        let s1 = sig(SignalId::Lmp, [1.0; HOURS]);
        let s2 = sig(SignalId::Ws, [1.0; HOURS]);
        assert!(two_node_shape([&s1, &s2], [&a, &b]).is_err());
    }

    #[test]
    fn plan_base_is_flat_and_missing_signal_errors() {
        let spec = FlexLoadSpec::new("a");
        let plan = plan_day(StrategyId::Base, &SignalBundle::new(), std::slice::from_ref(&spec), &[], None).unwrap();
        assert!(plan.shape.nodes()[0].mw.iter().all(|&v| v == 400));
        let err = plan_day(StrategyId::Lmp, &SignalBundle::new(), std::slice::from_ref(&spec), &[], None).unwrap_err();
        assert!(matches!(err, Error::MissingSignal(SignalId::Lmp)));
    }

    #[test]
    fn strategy_names_round_trip() {
        for id in StrategyId::ALL {
            assert_eq!(id.name().parse::<StrategyId>().unwrap(), id);
        }
    }
}
