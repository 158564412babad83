//! Scenario bundles on disk and the synthetic year generator.
//!
//! A bundle is a directory:
//!
//! * `case.json`: `{ "format_version", "case", "flex_sites", "cfeg_units" }`
//! * `demand.csv`, `availability.csv`: `date,hour,entity,value`, ordered by
//!   date, then entity in case order, then hour 0..23
//! * `signals.csv` (optional): `date,hour,name,scope,value`, 24 consecutive
//!   hours per (date, name, scope)
//! * `labels.csv` (optional): `date,season`
//!
//! Numbers are written in shortest round-trip form, so loading a written
//! bundle reproduces it exactly.

mod synth;

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use synth::{generate_synthetic_year, summer_weight, synthetic_case, SynthConfig, ZoneParams, TESLA, TYLERGND};

use crate::dispatch::DayScenario;
use crate::error::{Error, Result};
use crate::grid::{validate_case, FlexLoadSpec, GridCase, HOURS};
use crate::signals::{SignalId, SignalVector};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Winter,
    Summer,
}

impl Season {
    pub fn name(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Summer => "summer",
        }
    }
}

/// One day of an externally supplied signal.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalSignal {
    pub date: NaiveDate,
    pub id: SignalId,
    pub scope: String,
    pub values: [f64; HOURS],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioBundle {
    pub case: GridCase,
    pub flex_sites: Vec<FlexLoadSpec>,
    /// Generator ids whose output forms the contracted clean-energy signal.
    pub cfeg_units: Vec<String>,
    pub days: Vec<DayScenario>,
    pub signals: Vec<ExternalSignal>,
    pub labels: Vec<(NaiveDate, Season)>,
}

impl ScenarioBundle {
    /// Pass-through lookup of an external signal.
    pub fn external_signal(&self, date: NaiveDate, id: SignalId, scope: &str) -> Option<SignalVector> {
        self.signals
            .iter()
            .find(|s| s.date == date && s.id == id && s.scope == scope)
            .map(|s| SignalVector { id, scope: scope.to_owned(), values: s.values })
    }

    pub fn label(&self, date: NaiveDate) -> Option<Season> {
        self.labels.iter().find(|(d, _)| *d == date).map(|(_, s)| *s)
    }

    pub fn cfeg_indices(&self) -> Result<Vec<usize>> {
        self.cfeg_units
            .iter()
            .map(|id| self.case.generator_index(id).ok_or_else(|| Error::Config(format!("unknown cfeg unit {id}"))))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let v = validate_case(&self.case);
        if !v.is_empty() {
            return Err(Error::InvalidCase(v));
        }
        for s in &self.flex_sites {
            s.validate()?;
            if self.case.bus_index(&s.bus).is_none() {
                return Err(Error::UnknownBus(s.bus.clone()));
            }
        }
        self.cfeg_indices()?;
        for d in &self.days {
            d.validate(&self.case)?;
        }
        Ok(())
    }

    /// Hour-by-hour supply adequacy with every flexible site at its base
    /// level: per zone, local capacity plus tie imports must cover demand,
    /// and must-run output must fit local demand plus exports.
    pub fn check_adequacy(&self) -> Result<()> {
        let case = &self.case;
        let zones = case.zones();
        for day in &self.days {
            for h in 0..HOURS {
                let mut total_d = 0.0;
                let mut total_cap = 0.0;
                let mut total_min = 0.0;
                for zone in &zones {
                    let mut demand = 0.0;
                    for (b, bus) in case.buses.iter().enumerate() {
                        if &bus.zone == zone {
                            demand += day.demand[b][h];
                        }
                    }
                    for s in &self.flex_sites {
                        if case.bus_index(&s.bus).is_some_and(|b| &case.buses[b].zone == zone) {
                            demand += s.base as f64;
                        }
                    }
                    let (mut cap, mut must) = (0.0, 0.0);
                    for (g, spec) in case.generators.iter().enumerate() {
                        if case.generator_zone(g) == Some(zone.as_str()) {
                            let avail = day.availability[g][h] * spec.p_max;
                            cap += match spec.daily_energy_budget {
                                Some(b) => avail.min(b),
                                None => avail,
                            };
                            must += spec.p_min.min(avail);
                        }
                    }
                    let tie: f64 = case
                        .lines
                        .iter()
                        .filter(|l| {
                            let zf = case.bus_index(&l.from_bus).map(|b| &case.buses[b].zone);
                            let zt = case.bus_index(&l.to_bus).map(|b| &case.buses[b].zone);
                            (zf == Some(zone)) != (zt == Some(zone))
                        })
                        .map(|l| l.flow_limit)
                        .sum();
                    if demand > cap + tie || must > demand + tie {
                        return Err(Error::Infeasible {
                            date: day.date,
                            hour: Some(h),
                            detail: format!("zone {zone}: demand {demand:.1} MW, capacity {cap:.1} MW, must-run {must:.1} MW, ties {tie:.1} MW"),
                        });
                    }
                    total_d += demand;
                    total_cap += cap;
                    total_min += must;
                }
                if total_d > total_cap || total_min > total_d {
                    return Err(Error::Infeasible {
                        date: day.date,
                        hour: Some(h),
                        detail: format!("demand {total_d:.1} MW outside [{total_min:.1}, {total_cap:.1}] MW"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CaseDocument {
    format_version: u32,
    case: GridCase,
    flex_sites: Vec<FlexLoadSpec>,
    #[serde(default)]
    cfeg_units: Vec<String>,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), e.into()))
}

fn write_series(path: &Path, days: &[DayScenario], entities: &[String], pick: impl Fn(&DayScenario) -> &[[f64; HOURS]]) -> Result<()> {
    let ctx = |e: csv::Error| Error::io(path.display().to_string(), e.into());
    let mut w = csv_writer(path)?;
    w.write_record(["date", "hour", "entity", "value"]).map_err(ctx)?;
    for day in days {
        let date = day.date.to_string();
        for (e, rows) in entities.iter().zip(pick(day)) {
            for (h, v) in rows.iter().enumerate() {
                w.write_record([date.as_str(), &h.to_string(), e, &v.to_string()]).map_err(ctx)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes `bundle` into directory `dir`, creating it if needed.
pub fn write_bundle(bundle: &ScenarioBundle, dir: &Path) -> Result<()> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |e| Error::io(p, e)
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let doc = CaseDocument {
        format_version: FORMAT_VERSION,
        case: bundle.case.clone(),
        flex_sites: bundle.flex_sites.clone(),
        cfeg_units: bundle.cfeg_units.clone(),
    };
    let path = dir.join("case.json");
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Config(e.to_string()))?;
    json.push('\n');
    fs::write(&path, json).map_err(io(&path))?;

    let buses: Vec<String> = bundle.case.buses.iter().map(|b| b.id.clone()).collect();
    let gens: Vec<String> = bundle.case.generators.iter().map(|g| g.id.clone()).collect();
    write_series(&dir.join("demand.csv"), &bundle.days, &buses, |d| &d.demand)?;
    write_series(&dir.join("availability.csv"), &bundle.days, &gens, |d| &d.availability)?;

    let sig_path = dir.join("signals.csv");
    if bundle.signals.is_empty() {
        if sig_path.exists() {
            fs::remove_file(&sig_path).map_err(io(&sig_path))?;
        }
    } else {
        write_signal_csv(&sig_path, &bundle.signals)?;
    }
    let label_path = dir.join("labels.csv");
    if bundle.labels.is_empty() {
        if label_path.exists() {
            fs::remove_file(&label_path).map_err(io(&label_path))?;
        }
    } else {
        let ctx = |e: csv::Error| Error::io(label_path.display().to_string(), e.into());
        let mut w = csv_writer(&label_path)?;
        w.write_record(["date", "season"]).map_err(ctx)?;
        for (d, s) in &bundle.labels {
            w.write_record([d.to_string().as_str(), s.name()]).map_err(ctx)?;
        }
        w.flush().map_err(io(&label_path))?;
    }
    Ok(())
}

/// Writes `date,hour,name,scope,value` rows.
pub fn write_signal_csv(path: &Path, signals: &[ExternalSignal]) -> Result<()> {
    let ctx = |e: csv::Error| Error::io(path.display().to_string(), e.into());
    let mut w = csv_writer(path)?;
    w.write_record(["date", "hour", "name", "scope", "value"]).map_err(ctx)?;
    for s in signals {
        let date = s.date.to_string();
        for (h, v) in s.values.iter().enumerate() {
            w.write_record([date.as_str(), &h.to_string(), s.id.name(), &s.scope, &v.to_string()]).map_err(ctx)?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Header-checked records of a CSV file; record `k` is data row `k + 1`.
fn read_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let file = path.display().to_string();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::io(file.clone(), e.into()))?;
    let found = r.headers().map_err(|e| Error::format(&file, 0, None, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(&file, 0, None, format!("expected header {}", header.join(","))));
    }
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        out.push(rec.map_err(|e| Error::format(&file, k + 1, None, e.to_string()))?);
    }
    Ok(out)
}

struct Cursor<'a> {
    file: String,
    header: &'a [&'a str],
    records: &'a [csv::StringRecord],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn row(&self) -> usize {
        self.pos + 1
    }

    fn current(&self, expect: &str) -> Result<&'a csv::StringRecord> {
        self.records
            .get(self.pos)
            .ok_or_else(|| Error::format(&self.file, self.row(), None, format!("missing row, expected {expect}")))
    }

    fn field(&self, rec: &'a csv::StringRecord, col: usize) -> &'a str {
        rec.get(col).unwrap_or("")
    }

    fn err(&self, col: usize, msg: String) -> Error {
        Error::format(&self.file, self.row(), Some(self.header[col]), msg)
    }

    fn date(&self, rec: &csv::StringRecord) -> Result<NaiveDate> {
        let s = self.field(rec, 0);
        let d: NaiveDate = s.parse().map_err(|_| self.err(0, format!("invalid date {s:?}")))?;
        if d.to_string() != s {
            return Err(self.err(0, format!("date {s:?} is not in YYYY-MM-DD form")));
        }
        Ok(d)
    }

    fn expect_hour(&self, rec: &csv::StringRecord, h: usize) -> Result<()> {
        let s = self.field(rec, 1);
        if s != h.to_string() {
            return Err(self.err(1, format!("expected hour {h}, found {s:?}")));
        }
        Ok(())
    }

    fn value(&self, rec: &csv::StringRecord, col: usize) -> Result<f64> {
        let s = self.field(rec, col);
        let v: f64 = s.parse().map_err(|_| self.err(col, format!("invalid number {s:?}")))?;
        if !v.is_finite() || v.to_string() != s {
            return Err(self.err(col, format!("number {s:?} is not finite or not in canonical form")));
        }
        Ok(v)
    }
}

/// Reads a `date,hour,entity,value` file: for each date, every entity in
/// order with hours 0..23.
fn read_series(
    path: &Path,
    entities: &[String],
    range: Option<(f64, f64)>,
) -> Result<Vec<(NaiveDate, Vec<[f64; HOURS]>)>> {
    const HEADER: [&str; 4] = ["date", "hour", "entity", "value"];
    let records = read_records(path, &HEADER)?;
    let mut c = Cursor { file: path.display().to_string(), header: &HEADER, records: &records, pos: 0 };
    let mut out: Vec<(NaiveDate, Vec<[f64; HOURS]>)> = Vec::new();
    while c.pos < records.len() {
        let date = c.date(&records[c.pos])?;
        if let Some((prev, _)) = out.last() {
            if date <= *prev {
                return Err(c.err(0, format!("date {date} does not follow {prev}")));
            }
        }
        let mut rows = vec![[0.0; HOURS]; entities.len()];
        for (e, entity) in entities.iter().enumerate() {
            for h in 0..HOURS {
                let rec = c.current(&format!("{date}, hour {h}, {entity}"))?;
                if c.date(rec)? != date {
                    return Err(c.err(0, format!("expected date {date}")));
                }
                c.expect_hour(rec, h)?;
                if c.field(rec, 2) != entity {
                    return Err(c.err(2, format!("expected entity {entity}, found {:?}", c.field(rec, 2))));
                }
                let v = c.value(rec, 3)?;
                if let Some((lo, hi)) = range {
                    if !(lo..=hi).contains(&v) {
                        return Err(c.err(3, format!("value {v} outside [{lo}, {hi}]")));
                    }
                }
                rows[e][h] = v;
                c.pos += 1;
            }
        }
        out.push((date, rows));
    }
    Ok(out)
}

/// Reads `date,hour,name,scope,value` rows in groups of 24 hours.
pub fn read_signal_csv(path: &Path) -> Result<Vec<ExternalSignal>> {
    const HEADER: [&str; 5] = ["date", "hour", "name", "scope", "value"];
    let records = read_records(path, &HEADER)?;
    let mut c = Cursor { file: path.display().to_string(), header: &HEADER, records: &records, pos: 0 };
    let mut out: Vec<ExternalSignal> = Vec::new();
    while c.pos < records.len() {
        let first = &records[c.pos];
        let date = c.date(first)?;
        let name = c.field(first, 2).to_owned();
        let id: SignalId = name.parse().map_err(|_| c.err(2, format!("unknown signal {name:?}")))?;
        let scope = c.field(first, 3).to_owned();
        if scope.is_empty() {
            return Err(c.err(3, "empty scope".into()));
        }
        if out.iter().any(|s| s.date == date && s.id == id && s.scope == scope) {
            return Err(c.err(2, format!("duplicate signal {name} ({scope}) on {date}")));
        }
        let mut values = [0.0; HOURS];
        for (h, v) in values.iter_mut().enumerate() {
            let rec = c.current(&format!("{date}, hour {h}, {name}, {scope}"))?;
            if c.date(rec)? != date || c.field(rec, 2) != name || c.field(rec, 3) != scope {
                return Err(c.err(1, format!("expected hour {h} of {name} ({scope}) on {date}")));
            }
            c.expect_hour(rec, h)?;
            *v = c.value(rec, 4)?;
            c.pos += 1;
        }
        out.push(ExternalSignal { date, id, scope, values });
    }
    Ok(out)
}

fn read_labels(path: &Path) -> Result<Vec<(NaiveDate, Season)>> {
    const HEADER: [&str; 2] = ["date", "season"];
    let records = read_records(path, &HEADER)?;
    let mut c = Cursor { file: path.display().to_string(), header: &HEADER, records: &records, pos: 0 };
    let mut out = Vec::with_capacity(records.len());
    while c.pos < records.len() {
        let rec = &records[c.pos];
        let date = c.date(rec)?;
        let season = match c.field(rec, 1) {
            "winter" => Season::Winter,
            "summer" => Season::Summer,
            s => return Err(c.err(1, format!("unknown season {s:?}"))),
        };
        out.push((date, season));
        c.pos += 1;
    }
    Ok(out)
}

/// Loads and validates a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<ScenarioBundle> {
    let path = dir.join("case.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let doc: CaseDocument = serde_json::from_str(&text)
        .map_err(|e| Error::format(path.display().to_string(), e.line(), None, e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::format(
            path.display().to_string(),
            1,
            Some("format_version"),
            format!("unsupported format version {}", doc.format_version),
        ));
    }
    let case = doc.case;
    let v = validate_case(&case);
    if !v.is_empty() {
        return Err(Error::InvalidCase(v));
    }
    let buses: Vec<String> = case.buses.iter().map(|b| b.id.clone()).collect();
    let gens: Vec<String> = case.generators.iter().map(|g| g.id.clone()).collect();
    let demand = read_series(&dir.join("demand.csv"), &buses, Some((0.0, f64::MAX)))?;
    let avail_path = dir.join("availability.csv");
    let avail = read_series(&avail_path, &gens, Some((0.0, 1.0)))?;
    if demand.len() != avail.len() || demand.iter().zip(&avail).any(|(a, b)| a.0 != b.0) {
        return Err(Error::format(avail_path.display().to_string(), 0, Some("date"), "dates differ from demand.csv"));
    }
    let days = demand
        .into_iter()
        .zip(avail)
        .map(|((date, demand), (_, availability))| DayScenario { date, demand, availability })
        .collect();
    let sig = dir.join("signals.csv");
    let signals = if sig.exists() { read_signal_csv(&sig)? } else { Vec::new() };
    let lab = dir.join("labels.csv");
    let labels = if lab.exists() { read_labels(&lab)? } else { Vec::new() };
    let bundle = ScenarioBundle { case, flex_sites: doc.flex_sites, cfeg_units: doc.cfeg_units, days, signals, labels };
    bundle.validate()?;
    Ok(bundle)
}
