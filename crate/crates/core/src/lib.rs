//! Counterfactual load-shaping laboratory.
//!
//! A flexible load (a data center) reshapes its day-ahead schedule following
//! some grid signal; the day is re-dispatched on a 24-hour DC-OPF and the
//! change in emissions and cost is measured against a flat baseline. The
//! crate also carries the daily strategy-selection policy, the feature study
//! that motivates it and the accounting used in reports.

pub mod analysis;
pub mod dispatch;
pub mod error;
pub mod experiment;
pub mod feature_study;
pub mod grid;
pub mod par;
pub mod policy;
pub mod scenario_io;
pub mod signals;
pub mod strategies;

pub use error::{Error, Result, ShapeError};
