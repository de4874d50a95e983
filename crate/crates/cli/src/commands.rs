use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use catguard::fock::FieldDensity;
use catguard::metrics::parity_expectation;
use catguard::persist::{self, fmt_f64};
use catguard::protocol::{
    initial_state, run_feedback_with, run_free_decay_with, CycleReport, FeedbackConfig, RunOptions, RunOutput,
};
use catguard::wigner::wigner_grid;
use rayon::prelude::*;

use crate::scenario::{Scenario, WignerRequest};
use crate::CliError;

pub const INITIAL_STATE: &str = "initial_state.txt";
pub const FINAL_STATE: &str = "final_state.txt";
pub const REPORT: &str = "report.jsonl";
pub const SWEEP_TABLE: &str = "sweep.json";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn save_state(rho: &FieldDensity, path: &Path) -> Result<(), CliError> {
    persist::save(rho, path).map_err(CliError::from)
}

fn checked_initial_state(cfg: &FeedbackConfig) -> Result<FieldDensity, CliError> {
    let rho = initial_state(cfg)?;
    cfg.fock()?.check_tail(rho.tail_population())?;
    Ok(rho)
}

pub fn prepare(scenario: &Scenario, out: &Path) -> Result<String, CliError> {
    let cfg = &scenario.config;
    let rho = checked_initial_state(cfg)?;
    create_dir(out)?;
    save_state(&rho, &out.join(INITIAL_STATE))?;
    let summary = format!(
        "{{\"alpha_re\":{},\"alpha_im\":{},\"dim\":{},\"protected_parity\":\"{}\",\"parity\":{},\"mean_photon_number\":{},\"norm\":{},\"tail_population\":{}}}\n",
        fmt_f64(cfg.alpha.re),
        fmt_f64(cfg.alpha.im),
        cfg.dim,
        parity_name(cfg),
        fmt_f64(parity_expectation(&rho)),
        fmt_f64(rho.mean_photon_number()),
        fmt_f64(rho.trace().re),
        fmt_f64(rho.tail_population()),
    );
    write(&out.join("prepare_summary.json"), &summary)?;
    Ok(summary)
}

fn parity_name(cfg: &FeedbackConfig) -> &'static str {
    match cfg.protected_parity {
        catguard::fock::Parity::Odd => "odd",
        catguard::fock::Parity::Even => "even",
    }
}

pub fn report_line(r: &CycleReport) -> String {
    let mut line = format!(
        "{{\"cycle\":{},\"gamma_t\":{},\"fidelity\":{},\"parity\":{},\"coherence\":{}",
        r.cycle,
        fmt_f64(r.gamma_t),
        fmt_f64(r.fidelity),
        fmt_f64(r.parity),
        fmt_f64(r.coherence)
    );
    if let Some(w) = r.min_wigner {
        let _ = write!(line, ",\"min_wigner\":{}", fmt_f64(w));
    }
    line.push('}');
    line
}

/// Outcome of one `run` into a directory.
pub struct RunSummary {
    pub last: CycleReport,
    pub warnings: Vec<String>,
}

fn evolve(cfg: &FeedbackConfig, feedback: bool, opts: &RunOptions) -> Result<RunOutput, CliError> {
    checked_initial_state(cfg)?;
    let out = if feedback {
        run_feedback_with(cfg, opts)?
    } else {
        let total = cfg.n_cycles as f64 * cfg.gamma_tau;
        run_free_decay_with(cfg.alpha, total, cfg.n_cycles, cfg, opts)?
    };
    Ok(out)
}

fn cycle_file(stem: &str, cycle: usize) -> String {
    format!("{stem}_cycle_{cycle:04}")
}

/// Runs one scenario into `out`: JSON-lines report, state snapshots, the
/// final state and any requested Wigner grids.
pub fn run_into(
    cfg: &FeedbackConfig,
    snapshots: &BTreeSet<usize>,
    wigner: Option<&WignerRequest>,
    feedback: bool,
    out: &Path,
) -> Result<RunSummary, CliError> {
    let wigner_cycles: BTreeSet<usize> =
        wigner.map(|w| w.at_cycles.iter().copied().filter(|c| *c <= cfg.n_cycles).collect()).unwrap_or_default();
    let opts = RunOptions { snapshot_at: snapshots.union(&wigner_cycles).copied().collect(), wigner_min: None };
    let mut output = evolve(cfg, feedback, &opts)?;
    create_dir(out)?;

    if let Some(req) = wigner {
        for r in output.reports.iter_mut().filter(|r| wigner_cycles.contains(&r.cycle)) {
            let rho = r.state.as_ref().expect("snapshot kept for every Wigner cycle");
            let grid = wigner_grid(rho, req.extent, req.n_points)?;
            r.min_wigner = Some(grid.min_value());
            grid.export(out, &cycle_file("wigner", r.cycle))?;
        }
    }

    let mut report = String::new();
    for r in &output.reports {
        report.push_str(&report_line(r));
        report.push('\n');
        if let Some(rho) = &r.state {
            if snapshots.contains(&r.cycle) {
                save_state(rho, &out.join(format!("{}.txt", cycle_file("state", r.cycle))))?;
            }
        }
    }
    write(&out.join(REPORT), &report)?;
    let last = output.last().clone();
    save_state(last.state.as_ref().expect("final state is always kept"), &out.join(FINAL_STATE))?;
    Ok(RunSummary { last, warnings: output.warnings })
}

pub fn run(scenario: &Scenario, feedback: bool, out: &Path) -> Result<RunSummary, CliError> {
    run_into(&scenario.config, &scenario.snapshot_cycles(), scenario.wigner.as_ref(), feedback, out)
}

pub fn wigner(state: &Path, extent: f64, n_points: usize, out: Option<&Path>) -> Result<String, CliError> {
    let rho = persist::load(state)?;
    let grid = wigner_grid(&rho, extent, n_points)?;
    match out {
        Some(dir) => {
            create_dir(dir)?;
            grid.export(dir, "wigner")?;
            Ok(String::new())
        }
        None => Ok(grid.to_csv()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    PProbe,
    PFb,
    GammaTau,
}

impl SweepParameter {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "p_probe" => Ok(Self::PProbe),
            "p_fb" => Ok(Self::PFb),
            "gamma_tau" => Ok(Self::GammaTau),
            other => Err(CliError::Validation(format!(
                "unknown sweep parameter `{other}` (expected p_probe, p_fb or gamma_tau)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PProbe => "p_probe",
            Self::PFb => "p_fb",
            Self::GammaTau => "gamma_tau",
        }
    }

    /// Scenario config with the parameter set. A γτ sweep keeps the total
    /// elapsed γt of the scenario and adjusts the cycle count.
    pub fn apply(self, base: &FeedbackConfig, value: f64) -> Result<FeedbackConfig, CliError> {
        let mut cfg = base.clone();
        match self {
            Self::PProbe => cfg.p_probe = value,
            Self::PFb => cfg.p_fb = value,
            Self::GammaTau => {
                let total = base.n_cycles as f64 * base.gamma_tau;
                if !(value > 0.0) {
                    return Err(CliError::Validation(format!("gamma_tau sweep values must be positive, got {value}")));
                }
                let n = (total / value).round();
                if (n * value - total).abs() > 1e-9 * total.max(1.0) {
                    return Err(CliError::Validation(format!(
                        "gamma_tau = {value} does not divide the scenario's elapsed γt = {total}"
                    )));
                }
                cfg.gamma_tau = value;
                cfg.n_cycles = n as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Accepts decimals and simple fractions such as `1/13`.
pub fn parse_value(text: &str) -> Result<f64, CliError> {
    let bad = || CliError::Validation(format!("cannot parse sweep value `{text}`"));
    let t = text.trim();
    let v = match t.split_once('/') {
        Some((a, b)) => {
            let num: f64 = a.trim().parse().map_err(|_| bad())?;
            let den: f64 = b.trim().parse().map_err(|_| bad())?;
            num / den
        }
        None => t.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

pub struct SweepPoint {
    pub value: f64,
    pub directory: String,
    pub summary: RunSummary,
}

pub fn sweep(
    scenario: &Scenario,
    parameter: SweepParameter,
    values: &[f64],
    feedback: bool,
    workers: Option<usize>,
    out: &Path,
) -> Result<Vec<SweepPoint>, CliError> {
    if values.is_empty() {
        return Err(CliError::Validation("sweep needs at least one value".into()));
    }
    let configs = values.iter().map(|v| parameter.apply(&scenario.config, *v)).collect::<Result<Vec<_>, _>>()?;
    create_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Validation(format!("worker pool: {e}")))?;
    let results: Vec<Result<SweepPoint, CliError>> = pool.install(|| {
        configs
            .par_iter()
            .zip(values.par_iter())
            .enumerate()
            .map(|(k, (cfg, value))| {
                let directory = format!("point_{k:03}");
                let base = Scenario { config: cfg.clone(), ..scenario.clone() };
                let summary =
                    run_into(cfg, &base.snapshot_cycles(), scenario.wigner.as_ref(), feedback, &out.join(&directory))?;
                Ok(SweepPoint { value: *value, directory, summary })
            })
            .collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    write(&out.join(SWEEP_TABLE), &sweep_table(parameter, feedback, &points))?;
    Ok(points)
}

pub fn sweep_table(parameter: SweepParameter, feedback: bool, points: &[SweepPoint]) -> String {
    let mut s = format!("{{\"parameter\":\"{}\",\"feedback\":{},\"points\":[", parameter.name(), feedback);
    for (k, p) in points.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        let r = &p.summary.last;
        let _ = write!(
            s,
            "{{\"value\":{},\"directory\":\"{}\",\"cycles\":{},\"final_gamma_t\":{},\"final_coherence\":{},\"final_fidelity\":{},\"final_parity\":{}}}",
            fmt_f64(p.value),
            p.directory,
            r.cycle,
            fmt_f64(r.gamma_t),
            fmt_f64(r.coherence),
            fmt_f64(r.fidelity),
            fmt_f64(r.parity)
        );
    }
    s.push_str("]}\n");
    s
}

pub fn output_dir(cli: Option<PathBuf>, scenario: &Scenario) -> PathBuf {
    cli.or_else(|| scenario.directory.clone()).unwrap_or_else(|| PathBuf::from("catguard-out"))
}
