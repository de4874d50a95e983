//! `catguard` command-line runner.
//!
//! Exit codes: 0 success, 2 validation, 3 truncation overflow, 4 I/O or
//! malformed file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::SweepParameter;
use crate::scenario::Scenario;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Truncation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Truncation(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Truncation(m) => write!(f, "truncation error: {m}"),
            CliError::Io(m) => write!(f, "file error: {m}"),
        }
    }
}

impl From<catguard::Error> for CliError {
    fn from(e: catguard::Error) -> Self {
        use catguard::Error as E;
        match e {
            E::TruncationOverflow { .. } => CliError::Truncation(e.to_string()),
            E::Io(_) | E::Format(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Parser)]
#[command(name = "catguard", version, about = "Automatic feedback protection of cavity cat states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heralded cat state and a JSON summary.
    Prepare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feedback (or free-decay) run: JSON-lines report, snapshots, Wigner grids.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        feedback: Switch,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Wigner grid of a saved state, as CSV on stdout or into --out.
    Wigner {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = catguard::wigner::DEFAULT_EXTENT)]
        extent: f64,
        #[arg(long, default_value_t = catguard::wigner::DEFAULT_POINTS)]
        n_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One run per parameter value, one subdirectory each, plus sweep.json.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// p_probe, p_fb or gamma_tau
        #[arg(long)]
        parameter: String,
        /// Comma-separated; fractions like 1/13 allowed.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, value_enum, default_value = "on")]
        feedback: Switch,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::load(path)?;
    if seed.is_some() {
        scenario.config.seed = seed;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn report_warnings(warnings: &[String]) -> Result<(), CliError> {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    match warnings.first() {
        Some(first) => Err(CliError::Truncation(format!(
            "{} cycle(s) exceeded the truncation tolerance; first: {first}",
            warnings.len()
        ))),
        None => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare { scenario, out } => {
            let scenario = load_scenario(&scenario, None)?;
            let dir = commands::output_dir(out, &scenario);
            print!("{}", commands::prepare(&scenario, &dir)?);
            Ok(())
        }
        Command::Run { scenario, feedback, out, seed } => {
            let scenario = load_scenario(&scenario, seed)?;
            let dir = commands::output_dir(out, &scenario);
            let summary = commands::run(&scenario, matches!(feedback, Switch::On), &dir)?;
            println!("{}", commands::report_line(&summary.last));
            report_warnings(&summary.warnings)
        }
        Command::Wigner { state, extent, n_points, out } => {
            print!("{}", commands::wigner(&state, extent, n_points, out.as_deref())?);
            Ok(())
        }
        Command::Sweep { scenario, parameter, values, feedback, out, seed, workers } => {
            let parameter = SweepParameter::parse(&parameter)?;
            let values = values.iter().map(|v| commands::parse_value(v)).collect::<Result<Vec<_>, _>>()?;
            if workers == Some(0) {
                return Err(CliError::Validation("--workers must be positive".into()));
            }
            let scenario = load_scenario(&scenario, seed)?;
            let dir = commands::output_dir(out, &scenario);
            let on = matches!(feedback, Switch::On);
            let points = commands::sweep(&scenario, parameter, &values, on, workers, &dir)?;
            print!("{}", commands::sweep_table(parameter, on, &points));
            let warnings: Vec<String> = points
                .iter()
                .flat_map(|p| p.summary.warnings.iter().map(move |w| format!("{}: {w}", p.directory)))
                .collect();
            report_warnings(&warnings)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("catguard: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
