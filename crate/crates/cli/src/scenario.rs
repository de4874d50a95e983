//! Scenario files: `[field]`, `[protocol]` and `[output]` tables, every key
//! optional, unknown keys rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use catguard::fock::{Parity, C64};
use catguard::protocol::{EvolutionMode, FeedbackConfig};
use catguard::wigner::{DEFAULT_EXTENT, DEFAULT_POINTS};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub alpha_re: Option<f64>,
    pub alpha_im: Option<f64>,
    pub dim: Option<usize>,
    pub truncation_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub phi: Option<f64>,
    pub gamma_tau: Option<f64>,
    pub p_probe: Option<f64>,
    pub p_fb: Option<f64>,
    pub n_cycles: Option<usize>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub protected_parity: Option<ParityName>,
    pub injection_efficiency: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    EnsembleAverage,
    StochasticTrajectory,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityName {
    Odd,
    Even,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
    pub wigner: Option<WignerSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSection {
    pub extent: Option<f64>,
    pub n_points: Option<usize>,
    #[serde(default)]
    pub at_cycles: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerRequest {
    pub extent: f64,
    pub n_points: usize,
    pub at_cycles: BTreeSet<usize>,
}

/// Parsed scenario; run [`Scenario::validate`] after overrides.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: FeedbackConfig,
    pub directory: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
    pub wigner: Option<WignerRequest>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        Self::from_file(file)
    }

    /// Checks the run configuration; call after command-line overrides.
    pub fn validate(&self) -> Result<(), CliError> {
        self.config.validate()?;
        Ok(())
    }

    fn from_file(file: ScenarioFile) -> Result<Self, CliError> {
        let d = FeedbackConfig::default();
        let f = file.field;
        let p = file.protocol;
        let config = FeedbackConfig {
            alpha: C64::new(f.alpha_re.unwrap_or(d.alpha.re), f.alpha_im.unwrap_or(d.alpha.im)),
            dim: f.dim.unwrap_or(d.dim),
            truncation_tol: f.truncation_tol.unwrap_or(d.truncation_tol),
            phi: p.phi.unwrap_or(d.phi),
            gamma_tau: p.gamma_tau.unwrap_or(d.gamma_tau),
            p_probe: p.p_probe.unwrap_or(d.p_probe),
            p_fb: p.p_fb.unwrap_or(d.p_fb),
            n_cycles: p.n_cycles.unwrap_or(d.n_cycles),
            mode: match p.mode {
                None | Some(Mode::EnsembleAverage) => EvolutionMode::EnsembleAverage,
                Some(Mode::StochasticTrajectory) => EvolutionMode::Trajectory,
            },
            seed: p.seed,
            protected_parity: match p.protected_parity {
                None | Some(ParityName::Odd) => Parity::Odd,
                Some(ParityName::Even) => Parity::Even,
            },
            injection_efficiency: p.injection_efficiency.unwrap_or(d.injection_efficiency),
        };
        if file.output.snapshot_every == Some(0) {
            return Err(CliError::Validation("output.snapshot_every must be positive".into()));
        }
        let wigner = match file.output.wigner {
            None => None,
            Some(w) => {
                let req = WignerRequest {
                    extent: w.extent.unwrap_or(DEFAULT_EXTENT),
                    n_points: w.n_points.unwrap_or(DEFAULT_POINTS),
                    at_cycles: w.at_cycles.into_iter().collect(),
                };
                if req.n_points < 2 || !(req.extent > 0.0) || !req.extent.is_finite() {
                    return Err(CliError::Validation(format!(
                        "output.wigner needs extent > 0 and n_points >= 2, got {} and {}",
                        req.extent, req.n_points
                    )));
                }
                Some(req)
            }
        };
        Ok(Self { config, directory: file.output.directory, snapshot_every: file.output.snapshot_every, wigner })
    }

    /// Cycles whose states are written: every `snapshot_every`-th, or {0, n/2, n}.
    pub fn snapshot_cycles(&self) -> BTreeSet<usize> {
        let n = self.config.n_cycles;
        let mut out: BTreeSet<usize> = match self.snapshot_every {
            Some(k) => (0..=n).step_by(k).collect(),
            None => [0, n / 2].into_iter().collect(),
        };
        out.insert(n);
        out
    }
}
