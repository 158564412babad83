//! 24-hour DC-OPF: economic dispatch, nodal prices, emissions, and the
//! CO2-penalized co-optimization benchmark.
//!
//! One LP couples all hours of a day. Per hour it has a dispatch variable per
//! generator, a voltage angle per non-slack bus and a flow per line; rows are
//! the nodal balances (whose duals are the LMPs) and the flow definitions
//! `f = base_mva * b * (theta_from - theta_to)`. Budgeted units add one daily
//! energy row each.

use std::io::Write;
use std::ops::Range;

use chrono::NaiveDate;
use shapelab_lp::{solve_with, Basis, LinearProgram, LpSolution, RowSense, SolverOptions, Status};

use crate::error::{Error, Result};
use crate::grid::{rank_levels, validate_case, FlexLoadSpec, GridCase, Level, LoadShape, NodeSchedule, HOURS};

/// Inelastic demand and availability for one day. Rows follow the order of
/// `case.buses` and `case.generators`.
#[derive(Clone, Debug, PartialEq)]
pub struct DayScenario {
    pub date: NaiveDate,
    /// MW per bus and hour.
    pub demand: Vec<[f64; HOURS]>,
    /// Fraction of `p_max` available per generator and hour.
    pub availability: Vec<[f64; HOURS]>,
}

impl DayScenario {
    pub fn validate(&self, case: &GridCase) -> Result<()> {
        let bad = |detail: String| Err(Error::InvalidScenario { date: self.date, detail });
        if self.demand.len() != case.buses.len() {
            return bad(format!("{} demand rows for {} buses", self.demand.len(), case.buses.len()));
        }
        if self.availability.len() != case.generators.len() {
            return bad(format!("{} availability rows for {} generators", self.availability.len(), case.generators.len()));
        }
        for (b, row) in self.demand.iter().enumerate() {
            if let Some(h) = row.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad(format!("demand at bus {} hour {h} must be finite and >= 0", case.buses[b].id));
            }
        }
        for (g, row) in self.availability.iter().enumerate() {
            if let Some(h) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("availability of {} at hour {h} must lie in [0, 1]", case.generators[g].id));
            }
        }
        Ok(())
    }

    pub fn total_demand(&self) -> [f64; HOURS] {
        let mut t = [0.0; HOURS];
        for row in &self.demand {
            for h in 0..HOURS {
                t[h] += row[h];
            }
        }
        t
    }

    /// Available MW (`availability * p_max`) of generator `g`.
    pub fn available_mw(&self, case: &GridCase, g: usize) -> [f64; HOURS] {
        let p_max = case.generators[g].p_max;
        let mut out = [0.0; HOURS];
        for h in 0..HOURS {
            out[h] = self.availability[g][h] * p_max;
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct DispatchResult {
    pub date: NaiveDate,
    /// MW per generator and hour.
    pub gen_mw: Vec<[f64; HOURS]>,
    /// $/MWh per bus and hour.
    pub lmp: Vec<[f64; HOURS]>,
    /// MW per line and hour, positive from `from_bus` to `to_bus`.
    pub flow: Vec<[f64; HOURS]>,
    /// Available minus dispatched MW; zero for non-intermittent units.
    pub curtailment: Vec<[f64; HOURS]>,
    /// `availability * p_max` per generator and hour.
    pub available_mw: Vec<[f64; HOURS]>,
    /// Total demand per bus and hour, flexible load included.
    pub bus_demand: Vec<[f64; HOURS]>,
    /// Bid cost of the dispatch in $.
    pub total_cost: f64,
    /// Sum over bus-hours of demand times LMP in $.
    pub load_payment: f64,
    pub emissions_t: f64,
    /// Unit is basic in the final LP basis and strictly inside its bounds.
    pub gen_interior: Vec<[bool; HOURS]>,
    pub basis: Option<Basis>,
}

impl DispatchResult {
    pub fn grid_demand(&self) -> [f64; HOURS] {
        sum_rows(&self.bus_demand)
    }

    pub fn total_generation(&self) -> [f64; HOURS] {
        sum_rows(&self.gen_mw)
    }

    /// Dispatched wind and solar MW per hour.
    pub fn renewable_generation(&self, case: &GridCase) -> [f64; HOURS] {
        let mut out = [0.0; HOURS];
        for (g, spec) in case.generators.iter().enumerate() {
            if spec.technology.is_intermittent() {
                for h in 0..HOURS {
                    out[h] += self.gen_mw[g][h];
                }
            }
        }
        out
    }

    /// Hourly tonnes of CO2.
    pub fn hourly_emissions(&self, case: &GridCase) -> [f64; HOURS] {
        let mut out = [0.0; HOURS];
        for (g, spec) in case.generators.iter().enumerate() {
            let k = case.carbon.tonnes_per_mwh(spec.technology);
            for h in 0..HOURS {
                out[h] += self.gen_mw[g][h] * k;
            }
        }
        out
    }

    /// Demand-weighted average LMP over the day in $/MWh.
    pub fn average_price(&self) -> f64 {
        let energy: f64 = self.bus_demand.iter().flatten().sum();
        if energy > 0.0 {
            self.load_payment / energy
        } else {
            0.0
        }
    }
}

fn sum_rows(rows: &[[f64; HOURS]]) -> [f64; HOURS] {
    let mut t = [0.0; HOURS];
    for row in rows {
        for h in 0..HOURS {
            t[h] += row[h];
        }
    }
    t
}

/// Emissions of a dispatch in tonnes: generator-major, hour-minor sum of
/// `MW * 1h * gCO2/kWh / 1000`.
pub fn emissions_of(case: &GridCase, gen_mw: &[[f64; HOURS]]) -> f64 {
    let mut total = 0.0;
    for (g, spec) in case.generators.iter().enumerate() {
        let ci = case.carbon.intensity(spec.technology);
        for h in 0..HOURS {
            total += gen_mw[g][h] * ci / 1000.0;
        }
    }
    total
}

#[derive(Clone, Debug)]
struct Layout {
    hours: Range<usize>,
    n_gen: usize,
    n_bus: usize,
    n_line: usize,
    /// Angle offset of each bus inside an hour block; `None` for the slack.
    theta: Vec<Option<usize>>,
    var_stride: usize,
    row_stride: usize,
    line_ends: Vec<(usize, usize)>,
    budget_gens: Vec<usize>,
    n_flex: usize,
}

impl Layout {
    fn new(case: &GridCase, hours: Range<usize>, n_flex: usize) -> Self {
        let slack = case.bus_index(&case.slack_bus).expect("validated slack bus");
        let mut theta = vec![None; case.buses.len()];
        let mut k = 0;
        for (b, t) in theta.iter_mut().enumerate() {
            if b != slack {
                *t = Some(k);
                k += 1;
            }
        }
        let line_ends = case
            .lines
            .iter()
            .map(|l| (case.bus_index(&l.from_bus).unwrap(), case.bus_index(&l.to_bus).unwrap()))
            .collect();
        let budget_gens = (0..case.generators.len()).filter(|&g| case.generators[g].daily_energy_budget.is_some()).collect();
        let (n_gen, n_bus, n_line) = (case.generators.len(), case.buses.len(), case.lines.len());
        Self {
            hours,
            n_gen,
            n_bus,
            n_line,
            theta,
            var_stride: n_gen + k + n_line,
            row_stride: n_bus + n_line,
            line_ends,
            budget_gens,
            n_flex,
        }
    }

    fn n_hours(&self) -> usize {
        self.hours.len()
    }

    fn p(&self, g: usize, t: usize) -> usize {
        t * self.var_stride + g
    }

    fn theta(&self, b: usize, t: usize) -> Option<usize> {
        self.theta[b].map(|k| t * self.var_stride + self.n_gen + k)
    }

    fn f(&self, l: usize, t: usize) -> usize {
        t * self.var_stride + self.var_stride - self.n_line + l
    }

    fn flex(&self, k: usize, t: usize) -> usize {
        self.n_hours() * self.var_stride + k * self.n_hours() + t
    }

    fn balance_row(&self, b: usize, t: usize) -> usize {
        t * self.row_stride + b
    }
}

/// Builds the dispatch LP over `hours` with zero demand. Continuous flexible
/// loads, if any, are withdrawn at their buses and tied to their joint
/// energy budget.
fn build_lp(case: &GridCase, sc: &DayScenario, hours: Range<usize>, flex: &[(usize, FlexLoadSpec)]) -> (LinearProgram, Layout) {
    let lay = Layout::new(case, hours.clone(), flex.len());
    let mut lp = LinearProgram::new();
    for (t, h) in hours.clone().enumerate() {
        for (g, spec) in case.generators.iter().enumerate() {
            let hi = sc.availability[g][h] * spec.p_max;
            let lo = spec.p_min.min(hi);
            let j = lp.add_var(spec.bid, lo, hi);
            debug_assert_eq!(j, lay.p(g, t));
        }
        for b in 0..lay.n_bus {
            if lay.theta(b, t).is_some() {
                lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY);
            }
        }
        for (l, line) in case.lines.iter().enumerate() {
            let j = lp.add_var(0.0, -line.flow_limit, line.flow_limit);
            debug_assert_eq!(j, lay.f(l, t));
        }
    }
    for (_, spec) in flex {
        for _ in hours.clone() {
            lp.add_var(0.0, (spec.base - spec.delta) as f64, (spec.base + spec.delta) as f64);
        }
    }

    for t in 0..lay.n_hours() {
        for b in 0..lay.n_bus {
            let mut coeffs = Vec::new();
            for (g, spec) in case.generators.iter().enumerate() {
                if case.bus_index(&spec.bus) == Some(b) {
                    coeffs.push((lay.p(g, t), 1.0));
                }
            }
            for (l, &(from, to)) in lay.line_ends.iter().enumerate() {
                if from == b {
                    coeffs.push((lay.f(l, t), -1.0));
                } else if to == b {
                    coeffs.push((lay.f(l, t), 1.0));
                }
            }
            for (k, (fb, _)) in flex.iter().enumerate() {
                if *fb == b {
                    coeffs.push((lay.flex(k, t), -1.0));
                }
            }
            lp.add_row(coeffs, RowSense::Eq, 0.0);
        }
        for (l, line) in case.lines.iter().enumerate() {
            let k = case.base_mva * line.susceptance;
            let (from, to) = lay.line_ends[l];
            let mut coeffs = vec![(lay.f(l, t), 1.0)];
            if let Some(j) = lay.theta(from, t) {
                coeffs.push((j, -k));
            }
            if let Some(j) = lay.theta(to, t) {
                coeffs.push((j, k));
            }
            lp.add_row(coeffs, RowSense::Eq, 0.0);
        }
    }
    for &g in &lay.budget_gens {
        let budget = case.generators[g].daily_energy_budget.unwrap();
        let coeffs = (0..lay.n_hours()).map(|t| (lay.p(g, t), 1.0)).collect();
        lp.add_row(coeffs, RowSense::Le, budget);
    }
    if !flex.is_empty() {
        let mut coeffs = Vec::new();
        let mut budget = 0.0;
        for (k, (_, spec)) in flex.iter().enumerate() {
            budget += spec.daily_budget_mwh() as f64;
            coeffs.extend((0..lay.n_hours()).map(|t| (lay.flex(k, t), 1.0)));
        }
        lp.add_row(coeffs, RowSense::Eq, budget);
    }
    (lp, lay)
}

/// Dispatch LP of one day, built once and re-solved for any demand profile.
/// Re-solves started from a previous basis only change right-hand sides and
/// go through the dual simplex.
#[derive(Clone, Debug)]
pub struct DayModel<'a> {
    case: &'a GridCase,
    scenario: &'a DayScenario,
    lp: LinearProgram,
    layout: Layout,
    opts: SolverOptions,
}

impl<'a> DayModel<'a> {
    pub fn new(case: &'a GridCase, scenario: &'a DayScenario) -> Result<Self> {
        let violations = validate_case(case);
        if !violations.is_empty() {
            return Err(Error::InvalidCase(violations));
        }
        scenario.validate(case)?;
        let (lp, layout) = build_lp(case, scenario, 0..HOURS, &[]);
        Ok(Self { case, scenario, lp, layout, opts: SolverOptions::default() })
    }

    pub fn case(&self) -> &'a GridCase {
        self.case
    }

    pub fn scenario(&self) -> &'a DayScenario {
        self.scenario
    }

    /// Per-bus demand: inelastic demand plus the scheduled flexible loads.
    pub fn demand_with(&self, shape: &LoadShape) -> Result<Vec<[f64; HOURS]>> {
        let mut demand = self.scenario.demand.clone();
        for node in shape.nodes() {
            let b = self.case.bus_index(&node.spec.bus).ok_or_else(|| Error::UnknownBus(node.spec.bus.clone()))?;
            for h in 0..HOURS {
                demand[b][h] += node.mw[h] as f64;
            }
        }
        Ok(demand)
    }

    pub fn solve(&self, shape: &LoadShape, warm: Option<&Basis>) -> Result<DispatchResult> {
        let demand = self.demand_with(shape)?;
        self.solve_demand(&demand, warm)
    }

    /// Solves with explicit total demand per bus and hour.
    pub fn solve_demand(&self, demand: &[[f64; HOURS]], warm: Option<&Basis>) -> Result<DispatchResult> {
        let mut lp = self.lp.clone();
        for (b, row) in demand.iter().enumerate() {
            for h in 0..HOURS {
                lp.rows[self.layout.balance_row(b, h)].rhs = row[h];
            }
        }
        let sol = self.run(&lp, warm, "dispatch")?;
        Ok(self.extract(&sol, &sol.x, demand))
    }

    fn run(&self, lp: &LinearProgram, warm: Option<&Basis>, context: &str) -> Result<LpSolution> {
        let date = self.scenario.date;
        let mut sol = solve_with(lp, warm, &self.opts)?;
        if sol.status == Status::NumericalFailure && warm.is_some() {
            sol = solve_with(lp, None, &self.opts)?;
        }
        match sol.status {
            Status::Optimal => Ok(sol),
            Status::Infeasible => Err(self.diagnose(lp)),
            Status::Unbounded => Err(Error::Numerical { date, context: format!("{context}: unbounded LP") }),
            Status::NumericalFailure => Err(Error::Numerical { date, context: context.to_owned() }),
        }
    }

    /// Finds the first hour that is infeasible on its own.
    fn diagnose(&self, full: &LinearProgram) -> Error {
        let date = self.scenario.date;
        for h in 0..HOURS {
            let (mut lp, lay) = build_lp(self.case, self.scenario, h..h + 1, &[]);
            for b in 0..lay.n_bus {
                lp.rows[lay.balance_row(b, 0)].rhs = full.rows[self.layout.balance_row(b, h)].rhs;
            }
            let ok = solve_with(&lp, None, &self.opts).map(|s| s.status == Status::Optimal).unwrap_or(false);
            if !ok {
                let demand: f64 = (0..lay.n_bus).map(|b| lp.rows[lay.balance_row(b, 0)].rhs).sum();
                let supply: f64 = (0..lay.n_gen).map(|g| lp.upper[lay.p(g, 0)]).sum();
                return Error::Infeasible {
                    date,
                    hour: Some(h),
                    detail: format!("demand {demand:.1} MW against {supply:.1} MW available or not deliverable"),
                };
            }
        }
        Error::Infeasible { date, hour: None, detail: "daily energy budgets cannot be met".into() }
    }

    fn extract(&self, sol: &LpSolution, x: &[f64], demand: &[[f64; HOURS]]) -> DispatchResult {
        let (case, lay) = (self.case, &self.layout);
        let mut gen_mw = vec![[0.0; HOURS]; lay.n_gen];
        let mut available_mw = vec![[0.0; HOURS]; lay.n_gen];
        let mut curtailment = vec![[0.0; HOURS]; lay.n_gen];
        let mut gen_interior = vec![[false; HOURS]; lay.n_gen];
        let mut total_cost = 0.0;
        for (g, spec) in case.generators.iter().enumerate() {
            for h in 0..HOURS {
                let j = lay.p(g, h);
                let p = x[j];
                gen_mw[g][h] = p;
                available_mw[g][h] = self.scenario.availability[g][h] * spec.p_max;
                total_cost += spec.bid * p;
                if spec.technology.is_intermittent() {
                    curtailment[g][h] = (available_mw[g][h] - p).max(0.0);
                }
                let tol = 1e-6 * (1.0 + spec.p_max);
                gen_interior[g][h] = sol.is_basic(j) && p > self.lp.lower[j] + tol && p < self.lp.upper[j] - tol;
            }
        }
        let mut lmp = vec![[0.0; HOURS]; lay.n_bus];
        let mut load_payment = 0.0;
        for b in 0..lay.n_bus {
            for h in 0..HOURS {
                lmp[b][h] = sol.row_duals[lay.balance_row(b, h)];
                load_payment += lmp[b][h] * demand[b][h];
            }
        }
        let mut flow = vec![[0.0; HOURS]; lay.n_line];
        for (l, row) in flow.iter_mut().enumerate() {
            for h in 0..HOURS {
                row[h] = x[lay.f(l, h)];
            }
        }
        let emissions_t = emissions_of(case, &gen_mw);
        DispatchResult {
            date: self.scenario.date,
            gen_mw,
            lmp,
            flow,
            curtailment,
            available_mw,
            bus_demand: demand.to_vec(),
            total_cost,
            load_payment,
            emissions_t,
            gen_interior,
            basis: sol.basis.clone(),
        }
    }
}

/// Economic dispatch of one day with the flexible loads at their scheduled
/// levels.
pub fn solve_day(case: &GridCase, scenario: &DayScenario, shape: &LoadShape) -> Result<DispatchResult> {
    DayModel::new(case, scenario)?.solve(shape, None)
}

/// Emissions response in gCO2/kWh to `epsilon` MW of extra demand at `bus`
/// during `hour`, everything else held fixed.
pub fn marginal_emissions(model: &DayModel<'_>, baseline: &DispatchResult, bus: usize, hour: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    if bus >= baseline.bus_demand.len() || hour >= HOURS {
        return Err(Error::Config(format!("bus {bus} hour {hour} out of range")));
    }
    let mut demand = baseline.bus_demand.clone();
    demand[bus][hour] += epsilon;
    let bumped = model.solve_demand(&demand, baseline.basis.as_ref())?;
    Ok((bumped.emissions_t - baseline.emissions_t) * 1000.0 / epsilon)
}

pub const DEFAULT_CO2_PENALTIES: [f64; 8] = [0.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0];

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    /// $/tCO2 penalties tried in order.
    pub co2_penalty_sweep: Vec<f64>,
    /// Loads whose schedule is optimized.
    pub flex: Vec<FlexLoadSpec>,
    /// Further flexible loads held flat at their base level.
    pub fixed: Vec<FlexLoadSpec>,
    /// Adds the exact optimum of the slot-separable emission model to the
    /// candidates.
    pub separable: bool,
    /// Further shapes of the optimized loads to try, e.g. those of
    /// practicable strategies.
    pub seeds: Vec<LoadShape>,
    /// Precomputed [`slot_responses`] for `flex`, reused by the separable
    /// candidate.
    pub responses: Option<SlotResponses>,
}

impl BenchmarkConfig {
    pub fn new(flex: Vec<FlexLoadSpec>, fixed: Vec<FlexLoadSpec>) -> Self {
        Self { co2_penalty_sweep: DEFAULT_CO2_PENALTIES.to_vec(), flex, fixed, separable: true, seeds: Vec::new(), responses: None }
    }

    fn validate(&self) -> Result<()> {
        if self.co2_penalty_sweep.is_empty() {
            return Err(Error::Config("CO2 penalty sweep is empty".into()));
        }
        if let Some(l) = self.co2_penalty_sweep.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::Config(format!("CO2 penalty must be finite and >= 0, got {l}")));
        }
        if self.flex.is_empty() {
            return Err(Error::Config("benchmark needs at least one flexible load".into()));
        }
        for s in self.flex.iter().chain(&self.fixed) {
            s.validate()?;
        }
        Ok(())
    }
}

/// Where a benchmark candidate shape came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CandidateSource {
    /// Rounded continuous co-optimization at this CO2 penalty ($/tCO2).
    Penalty(f64),
    /// Exact optimum of the slot-separable emission model.
    Separable,
    /// The seed shape at this index.
    Seed(usize),
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub source: CandidateSource,
    /// Continuous flexible schedule per optimized node; empty for
    /// separable candidates.
    pub continuous: Vec<[f64; HOURS]>,
    pub shape: LoadShape,
    /// Emissions and cost of `shape` under economic dispatch.
    pub emissions_t: f64,
    pub total_cost: f64,
}

#[derive(Clone, Debug)]
pub struct BenchmarkOutcome {
    pub shape: LoadShape,
    pub dispatch: DispatchResult,
    pub source: CandidateSource,
    pub candidates: Vec<Candidate>,
}

/// Rounds continuous schedules to three-level shapes by ranking deviations
/// from base across all node-hours.
pub fn round_schedule(specs: &[FlexLoadSpec], continuous: &[[f64; HOURS]]) -> Result<LoadShape> {
    if specs.len() != continuous.len() {
        return Err(Error::Config(format!("{} specs but {} schedules", specs.len(), continuous.len())));
    }
    let score: Vec<[f64; HOURS]> = specs
        .iter()
        .zip(continuous)
        .map(|(s, row)| {
            let mut d = [0.0; HOURS];
            for h in 0..HOURS {
                d[h] = row[h] - s.base as f64;
            }
            d
        })
        .collect();
    let n_up = specs.iter().map(|s| s.hours_up).sum();
    let n_down = specs.iter().map(|s| s.hours_down).sum();
    shape_from_levels(specs, rank_levels(&score, n_up, n_down)?)
}

fn shape_from_levels(specs: &[FlexLoadSpec], levels: Vec<[Level; HOURS]>) -> Result<LoadShape> {
    let nodes = specs
        .iter()
        .zip(levels)
        .map(|(s, lv)| {
            let mut mw = [s.base; HOURS];
            for h in 0..HOURS {
                mw[h] = s.level_mw(lv[h]);
            }
            NodeSchedule { spec: s.clone(), mw }
        })
        .collect();
    Ok(LoadShape::new(nodes)?)
}

/// Picks exactly `n_up` slots to raise and `n_down` to lower minimizing
/// `sum up[s]` over raised plus `sum down[s]` over lowered slots. Dynamic
/// program over slots in order; ties prefer leaving a slot flat, then
/// raising it.
pub fn separable_assignment(up: &[f64], down: &[f64], n_up: usize, n_down: usize) -> Result<Vec<Level>> {
    let n = up.len();
    if down.len() != n || n_up + n_down > n {
        return Err(Error::Config(format!("cannot place {n_up} up and {n_down} down slots in {n}")));
    }
    let (w, dn) = (n_up + 1, n_down + 1);
    let idx = |s: usize, u: usize, d: usize| (s * w + u) * dn + d;
    let mut cost = vec![f64::INFINITY; (n + 1) * w * dn];
    let mut choice = vec![Level::Flat; (n + 1) * w * dn];
    cost[idx(0, 0, 0)] = 0.0;
    for s in 0..n {
        for u in 0..w {
            for d in 0..dn {
                let c = cost[idx(s, u, d)];
                if !c.is_finite() {
                    continue;
                }
                let moves = [(u, d, 0.0, Level::Flat), (u + 1, d, up[s], Level::Up), (u, d + 1, down[s], Level::Down)];
                for (nu, nd, extra, level) in moves {
                    if nu < w && nd < dn {
                        let k = idx(s + 1, nu, nd);
                        if c + extra < cost[k] {
                            cost[k] = c + extra;
                            choice[k] = level;
                        }
                    }
                }
            }
        }
    }
    let mut levels = vec![Level::Flat; n];
    let (mut u, mut d) = (n_up, n_down);
    for s in (0..n).rev() {
        let level = choice[idx(s + 1, u, d)];
        levels[s] = level;
        match level {
            Level::Up => u -= 1,
            Level::Down => d -= 1,
            Level::Flat => {}
        }
    }
    Ok(levels)
}

/// Emission change in tonnes of each flexible slot moved alone to its raised
/// (`up`) and lowered (`down`) level, node-major, everything else as in the
/// base dispatch.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotResponses {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

impl SlotResponses {
    /// Node-major concatenation.
    pub fn concat(parts: &[&SlotResponses]) -> Self {
        Self { up: parts.iter().flat_map(|p| p.up.iter().copied()).collect(), down: parts.iter().flat_map(|p| p.down.iter().copied()).collect() }
    }
}

pub fn slot_responses(model: &DayModel<'_>, base: &DispatchResult, flex: &[FlexLoadSpec]) -> Result<SlotResponses> {
    let case = model.case;
    let mut up = Vec::with_capacity(flex.len() * HOURS);
    let mut down = Vec::with_capacity(flex.len() * HOURS);
    for spec in flex {
        let b = case.bus_index(&spec.bus).ok_or_else(|| Error::UnknownBus(spec.bus.clone()))?;
        for h in 0..HOURS {
            for (sign, out) in [(1.0, &mut up), (-1.0, &mut down)] {
                let mut demand = base.bus_demand.clone();
                demand[b][h] += sign * spec.delta as f64;
                let d = model.solve_demand(&demand, base.basis.as_ref())?;
                out.push(d.emissions_t - base.emissions_t);
            }
        }
    }
    Ok(SlotResponses { up, down })
}

/// Co-optimizes dispatch cost plus `lambda` times emissions with continuous
/// flexible loads for every penalty in the sweep and rounds each schedule.
/// With `separable` set, one more candidate comes from the exact optimum of
/// the slot-separable emission model. Every candidate is re-dispatched
/// economically; the lowest-emission one wins (earliest on ties).
pub fn co_optimize_benchmark(
    model: &DayModel<'_>,
    baseline: Option<&DispatchResult>,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkOutcome> {
    cfg.validate()?;
    let case = model.case;
    let scenario = model.scenario;
    let mut flex = Vec::with_capacity(cfg.flex.len());
    for s in &cfg.flex {
        let b = case.bus_index(&s.bus).ok_or_else(|| Error::UnknownBus(s.bus.clone()))?;
        flex.push((b, s.clone()));
    }
    let (mut lp, lay) = build_lp(case, scenario, 0..HOURS, &flex);
    let fixed: Vec<NodeSchedule> = if cfg.fixed.is_empty() { Vec::new() } else { LoadShape::flat(&cfg.fixed)?.nodes().to_vec() };
    let demand = if fixed.is_empty() { scenario.demand.clone() } else { model.demand_with(&LoadShape::new(fixed.clone())?)? };
    for b in 0..lay.n_bus {
        for h in 0..HOURS {
            lp.rows[lay.balance_row(b, h)].rhs = demand[b][h];
        }
    }
    let all_flat = {
        let mut specs = cfg.flex.clone();
        specs.extend(cfg.fixed.iter().cloned());
        LoadShape::flat(&specs)?
    };
    let owned_base;
    let base = match baseline {
        Some(b) => b,
        None => {
            owned_base = model.solve(&all_flat, None)?;
            &owned_base
        }
    };
    let with_fixed = |shape: LoadShape| -> Result<LoadShape> {
        let mut nodes = shape.nodes().to_vec();
        nodes.extend(fixed.iter().cloned());
        Ok(LoadShape::new(nodes)?)
    };

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut best: Option<(usize, DispatchResult)> = None;
    let mut consider = |source, continuous, shape: LoadShape, candidates: &mut Vec<Candidate>| -> Result<()> {
        let (emissions_t, total_cost) = match candidates.iter().find(|c| c.shape == shape) {
            Some(c) => (c.emissions_t, c.total_cost),
            None => {
                let d = model.solve(&shape, base.basis.as_ref())?;
                let out = (d.emissions_t, d.total_cost);
                if best.as_ref().is_none_or(|(_, b)| d.emissions_t < b.emissions_t) {
                    best = Some((candidates.len(), d));
                }
                out
            }
        };
        candidates.push(Candidate { source, continuous, shape, emissions_t, total_cost });
        Ok(())
    };

    let bids: Vec<f64> = case.generators.iter().map(|g| g.bid).collect();
    let tonnes: Vec<f64> = case.generators.iter().map(|g| case.carbon.tonnes_per_mwh(g.technology)).collect();
    let mut warm: Option<Basis> = None;
    for &lambda in &cfg.co2_penalty_sweep {
        for h in 0..HOURS {
            for g in 0..lay.n_gen {
                lp.objective[lay.p(g, h)] = bids[g] + lambda * tonnes[g];
            }
        }
        let sol = model.run(&lp, warm.as_ref(), &format!("benchmark at penalty {lambda}"))?;
        warm = sol.basis.clone();
        let continuous: Vec<[f64; HOURS]> = (0..lay.n_flex)
            .map(|k| {
                let mut row = [0.0; HOURS];
                for h in 0..HOURS {
                    row[h] = sol.x[lay.flex(k, h)];
                }
                row
            })
            .collect();
        let shape = with_fixed(round_schedule(&cfg.flex, &continuous)?)?;
        consider(CandidateSource::Penalty(lambda), continuous, shape, &mut candidates)?;
    }

    if cfg.separable {
        let r = match &cfg.responses {
            Some(r) if r.up.len() == flex.len() * HOURS && r.down.len() == flex.len() * HOURS => r.clone(),
            Some(_) => return Err(Error::Config("slot responses do not match the optimized loads".into())),
            None => slot_responses(model, base, &cfg.flex)?,
        };
        let (up, down) = (r.up, r.down);
        let n_up = cfg.flex.iter().map(|s| s.hours_up).sum();
        let n_down = cfg.flex.iter().map(|s| s.hours_down).sum();
        let levels = separable_assignment(&up, &down, n_up, n_down)?;
        let per_node = levels
            .chunks(HOURS)
            .map(|c| {
                let mut lv = [Level::Flat; HOURS];
                lv.copy_from_slice(c);
                lv
            })
            .collect();
        let shape = with_fixed(shape_from_levels(&cfg.flex, per_node)?)?;
        consider(CandidateSource::Separable, Vec::new(), shape, &mut candidates)?;
    }

    for (k, seed) in cfg.seeds.iter().enumerate() {
        let specs: Vec<FlexLoadSpec> = seed.specs();
        if specs != cfg.flex {
            return Err(Error::Config(format!("seed shape {k} does not cover the optimized loads")));
        }
        consider(CandidateSource::Seed(k), Vec::new(), with_fixed(seed.clone())?, &mut candidates)?;
    }

    let (i, dispatch) = best.expect("at least one candidate");
    Ok(BenchmarkOutcome { shape: candidates[i].shape.clone(), dispatch, source: candidates[i].source, candidates })
}

/// Price-setting unit at `bus` in `hour`: an interior unit whose bid equals
/// the LMP there (same zone preferred), else any unit bidding the LMP.
/// `None` when no unit can be identified.
pub fn marginal_unit(case: &GridCase, result: &DispatchResult, bus: usize, hour: usize) -> Option<usize> {
    let price = result.lmp[bus][hour];
    let tol = 1e-6 * (1.0 + price.abs());
    let zone = &case.buses[bus].zone;
    let matches = |g: usize| (case.generators[g].bid - price).abs() <= tol;
    let interior: Vec<usize> = (0..case.generators.len()).filter(|&g| result.gen_interior[g][hour] && matches(g)).collect();
    if let Some(&g) = interior.iter().find(|&&g| case.generator_zone(g) == Some(zone.as_str())) {
        return Some(g);
    }
    if let Some(&g) = interior.first() {
        return Some(g);
    }
    (0..case.generators.len()).find(|&g| matches(g))
}

/// Writes `date,hour,generator,technology,mw` rows.
pub fn write_dispatch_csv<W: Write>(case: &GridCase, result: &DispatchResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ctx = |e: csv::Error| Error::io("writing dispatch CSV", e.into());
    w.write_record(["date", "hour", "generator", "technology", "mw"]).map_err(ctx)?;
    let date = result.date.to_string();
    for h in 0..HOURS {
        for (g, spec) in case.generators.iter().enumerate() {
            w.write_record([date.as_str(), &h.to_string(), &spec.id, spec.technology.name(), &result.gen_mw[g][h].to_string()])
                .map_err(ctx)?;
        }
    }
    w.flush().map_err(|e| Error::io("writing dispatch CSV", e))
}

/// Writes `date,hour,bus,lmp` rows.
pub fn write_lmp_csv<W: Write>(case: &GridCase, result: &DispatchResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ctx = |e: csv::Error| Error::io("writing LMP CSV", e.into());
    w.write_record(["date", "hour", "bus", "lmp"]).map_err(ctx)?;
    let date = result.date.to_string();
    for h in 0..HOURS {
        for (b, bus) in case.buses.iter().enumerate() {
            w.write_record([date.as_str(), &h.to_string(), &bus.id, &result.lmp[b][h].to_string()]).map_err(ctx)?;
        }
    }
    w.flush().map_err(|e| Error::io("writing LMP CSV", e))
}
