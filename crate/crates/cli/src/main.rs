//! `shapelab`: generate scenarios, simulate strategies and policies over a
//! year, tune the cherry-picking thresholds and write report tables.

mod commands;
mod days;
mod state;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shapelab_core::Error;

use crate::days::DaySpan;

#[derive(Parser, Debug)]
#[command(name = "shapelab", version, about = "Counterfactual load-shaping laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic scenario bundle.
    Generate(GenerateArgs),
    /// Run the flat baseline and the requested strategies on every day.
    Simulate(SimulateArgs),
    /// Tune the per-regime min(LMP) thresholds on a simulated run.
    Tune(TuneArgs),
    /// Train the stump forest on a simulated run and rank features.
    Features(FeatureArgs),
    /// Yearly summaries and plot-ready tables of a simulated run.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Output directory of the bundle.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of days, starting on January 1st.
    #[arg(long, default_value_t = 365)]
    pub days: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Strategies to run, comma separated, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<String>,
    /// Also apply a cherry-picking policy file to every day.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// One flexible site, or two sites shaped alone and together.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<String>,
    /// `N` for the first N days, or `A..B` with 1-based indices or
    /// YYYY-MM-DD dates, both inclusive.
    #[arg(long)]
    pub days: Option<DaySpan>,
    /// Every day of the bundle (the default).
    #[arg(long, conflicts_with = "days")]
    pub year: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the regime clustering.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Record failing days and go on.
    #[arg(long)]
    pub keep_going: bool,
    /// Write hourly dispatch and LMP files of the baseline and kept runs.
    #[arg(long)]
    pub export_dispatch: bool,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    /// Directory of a simulated run; results are written there too.
    #[arg(long)]
    pub out: PathBuf,
    /// Candidate strategies, comma separated, or `all`; default lmp, zws
    /// and wme.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<String>,
    /// Tune only this node group.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<String>,
    /// Also write the tuned policy to this file (one group only).
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LabelKind {
    /// The best of the candidate strategies each day.
    Best,
    /// The threshold rule at a fixed min(LMP) threshold.
    Rule,
    /// The threshold rule at each regime's median min(LMP).
    Median,
}

#[derive(Args, Debug)]
pub struct FeatureArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Node group to study; default the first group of the run.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<String>,
    #[arg(long, value_enum, default_value_t = LabelKind::Best)]
    pub labels: LabelKind,
    /// Candidate labels for `--labels best`.
    #[arg(long, value_delimiter = ',', default_value = "lmp,zws,wme")]
    pub strategy: Vec<String>,
    /// min(LMP) threshold for `--labels rule`, $/MWh.
    #[arg(long, default_value_t = 5.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 200)]
    pub trees: usize,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Add the savings of a cherry-picking policy to the summary.
    #[arg(long)]
    pub policy: Option<PathBuf>,
}

/// Exit code and a short kind for the machine-readable error line.
fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Infeasible { .. } | Error::InvalidScenario { .. } => (3, "infeasible"),
        Error::Numerical { .. } | Error::Lp(_) => (4, "numerical"),
        _ => (2, "config"),
    }
}

fn error_date(e: &Error) -> Option<String> {
    match e {
        Error::Infeasible { date, .. } | Error::InvalidScenario { date, .. } | Error::Numerical { date, .. } => Some(date.to_string()),
        _ => None,
    }
}

fn error_line(code: u8, kind: &str, date: Option<String>, message: &str) -> String {
    serde_json::json!({ "error": kind, "code": code, "date": date, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            let first = e.to_string().lines().next().unwrap_or_default().to_owned();
            eprintln!("{}", error_line(2, "usage", None, &first));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Features(a) => commands::features(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("{}", error_line(code, kind, error_date(&e), &e.to_string()));
            ExitCode::from(code)
        }
    }
}
