use std::str::FromStr;

use chrono::NaiveDate;
use shapelab_core::dispatch::DayScenario;
use shapelab_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// 1-based position in the bundle.
    Index(usize),
    Date(NaiveDate),
}

/// Day selection of `--days`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaySpan {
    First(usize),
    Range(Bound, Bound),
}

fn bound(s: &str) -> Result<Bound, String> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(Bound::Date(d));
    }
    match s.parse::<usize>() {
        Ok(0) => Err("day indices start at 1".into()),
        Ok(i) => Ok(Bound::Index(i)),
        Err(_) => Err(format!("{s:?} is neither a day index nor a YYYY-MM-DD date")),
    }
}

impl FromStr for DaySpan {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once("..") {
            Some((a, b)) => Ok(DaySpan::Range(bound(a.trim())?, bound(b.trim())?)),
            None => match s.trim().parse::<usize>() {
                Ok(0) => Err("at least one day is needed".into()),
                Ok(n) => Ok(DaySpan::First(n)),
                Err(_) => Err(format!("{s:?} is not N or A..B")),
            },
        }
    }
}

fn position(days: &[DayScenario], b: Bound) -> Result<usize> {
    match b {
        Bound::Index(i) if i <= days.len() => Ok(i - 1),
        Bound::Index(i) => Err(Error::Config(format!("day {i} is past the last of {} days", days.len()))),
        Bound::Date(d) => days.iter().position(|s| s.date == d).ok_or_else(|| Error::Config(format!("the bundle has no day {d}"))),
    }
}

/// The selected days, in bundle order.
pub fn select(days: Vec<DayScenario>, span: DaySpan) -> Result<Vec<DayScenario>> {
    let (from, to) = match span {
        DaySpan::First(n) => (0, n.min(days.len()).saturating_sub(1)),
        DaySpan::Range(a, b) => (position(&days, a)?, position(&days, b)?),
    };
    if days.is_empty() || from > to {
        return Err(Error::Config("the day selection is empty".into()));
    }
    Ok(days.into_iter().skip(from).take(to - from + 1).collect())
}
