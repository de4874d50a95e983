//! The automatic feedback cycle.
//!
//! One cycle is: cavity damping over γτ, then (if present) a probe atom that
//! maps field parity onto its {e, g} state, copies a `g` outcome into the
//! auxiliary cavity C′ as a photon, and (if present) a feedback atom that
//! picks the photon up from C′, is flipped g → e by a π pulse and deposits
//! one photon in the cavity by adiabatic passage.
//!
//! The field-only map of the corrective pass is built twice: from the full
//! `probe ⊗ feedback ⊗ cprime ⊗ field` simulation ([`multipartite_corrective_kraus`])
//! and from projector algebra ([`analytic_correction`]). [`cycle_channel`]
//! uses the former; the latter is the oracle.
//!
//! Frame: the probe's conditional phase gate also rotates the whole field by
//! e^{iφn}. That rotation is common to both atomic branches and commutes with
//! damping, parity projection and the photon shift (up to a global phase), so
//! the probe pass removes it and the protected cat keeps a fixed orientation.
//! Conditional preparation keeps the literal gate, which puts the initial cat
//! at ±iα.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{unvectorize, vectorize, Channel, KrausChannel, SuperOperator};
use crate::dynamics::{
    cprime_pi_pulse, damping_channel, dispersive_unitary, lift_atom_field_to_three_level, lift_to_three_level,
    photon_injection_with_efficiency, ramsey_unitary, AtomLevel, DampingChannel, InjectionGate, SwapPhase, HALF_PI,
};
use crate::error::{Error, Result};
use crate::fock::{
    cat_state, coherent_state, parity_projectors, phase_rotation, shift_operator, CMatrix, CVector, FieldDensity,
    FockConfig, Parity, PureFieldState, C64, I, ZERO,
};
use crate::metrics::{cat_coherence, fidelity, parity_expectation};
use crate::tensor::{
    basis_vector, kron, kron_vectors, projector, Factor, JointState, Layout, LocalOp, CPRIME, FEEDBACK, FIELD, PROBE,
};
use crate::wigner::wigner_grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolutionMode {
    EnsembleAverage,
    Trajectory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackConfig {
    pub alpha: C64,
    pub phi: f64,
    /// γτ_pr, cavity decay per cycle.
    pub gamma_tau: f64,
    pub p_probe: f64,
    pub p_fb: f64,
    pub n_cycles: usize,
    pub dim: usize,
    pub mode: EvolutionMode,
    pub seed: Option<u64>,
    pub protected_parity: Parity,
    /// Probability that the adiabatic passage deposits its photon.
    pub injection_efficiency: f64,
    pub truncation_tol: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            alpha: C64::from(3.3f64.sqrt()),
            phi: HALF_PI,
            gamma_tau: 1.0 / 13.0,
            p_probe: 1.0,
            p_fb: 1.0,
            n_cycles: 13,
            dim: 40,
            mode: EvolutionMode::EnsembleAverage,
            seed: None,
            protected_parity: Parity::Odd,
            injection_efficiency: 1.0,
            truncation_tol: crate::fock::DEFAULT_TRUNCATION_TOL,
        }
    }
}

impl FeedbackConfig {
    pub fn fock(&self) -> Result<FockConfig> {
        FockConfig::with_tolerance(self.dim, self.truncation_tol)
    }

    pub fn validate(&self) -> Result<FockConfig> {
        let fock = self.fock()?;
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {p} outside [0, 1]")))
            }
        };
        prob("p_probe", self.p_probe)?;
        prob("p_fb", self.p_fb)?;
        prob("injection_efficiency", self.injection_efficiency)?;
        if !(self.gamma_tau >= 0.0) || !self.gamma_tau.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma_tau = {} must be finite and >= 0", self.gamma_tau)));
        }
        if (self.phi - HALF_PI).abs() > 1e-12 {
            return Err(Error::ParityScheme(self.phi));
        }
        if !self.alpha.re.is_finite() || !self.alpha.im.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if self.protected_parity == Parity::Odd && self.alpha.norm() == 0.0 {
            return Err(Error::OddCatAtOrigin);
        }
        if self.mode == EvolutionMode::Trajectory && self.seed.is_none() {
            return Err(Error::InvalidParameter("trajectory mode requires a seed".into()));
        }
        Ok(fock)
    }

    /// Detection outcome of the preparation atom that heralds the protected parity.
    pub fn heralding_level(&self) -> AtomLevel {
        match self.protected_parity {
            Parity::Odd => AtomLevel::E,
            Parity::Even => AtomLevel::G,
        }
    }

    /// Lobe amplitude of the initial cat (iα, see module docs).
    pub fn cat_amplitude(&self) -> C64 {
        I * self.alpha
    }
}

fn two_level_index(level: AtomLevel) -> Result<usize> {
    match level {
        AtomLevel::E | AtomLevel::G => Ok(level.index()),
        AtomLevel::I => Err(Error::InvalidParameter("detected level must be e or g".into())),
    }
}

/// R(π/2) · U_disp(π/2) · R(π/2) on {e,g} ⊗ field, literal gate conventions.
fn preparation_unitary(cfg: &FockConfig) -> CMatrix {
    let d = cfg.dim();
    let r = kron(&ramsey_unitary(HALF_PI), &CMatrix::identity(d, d));
    &r * dispersive_unitary(HALF_PI, cfg).unitary * &r
}

/// Entangled atom–field pure state after the preparation atom leaves R₂.
pub fn prepare_entangled(alpha: C64, cfg: &FockConfig) -> CVector {
    let input = kron_vectors(&[&basis_vector(2, AtomLevel::E.index()), coherent_state(alpha, cfg).amplitudes()]);
    preparation_unitary(cfg) * input
}

/// Field state heralded by detecting the preparation atom in `detected`:
/// `e` gives the odd cat at ±iα, `g` the even one.
pub fn prepare_cat_conditional(alpha: C64, detected: AtomLevel, cfg: &FockConfig) -> Result<FieldDensity> {
    let k = two_level_index(detected)?;
    let d = cfg.dim();
    let joint = prepare_entangled(alpha, cfg);
    let branch = joint.rows(k * d, d).into_owned();
    if branch.norm_squared() < 1e-24 {
        return Err(Error::ZeroProbabilityBranch);
    }
    let state = PureFieldState::new(branch)?;
    Ok(state.density())
}

/// Second-pulse area: +π/2 correlates e with odd parity, −π/2 with even.
fn second_pulse_area(protected: Parity) -> f64 {
    match protected {
        Parity::Odd => HALF_PI,
        Parity::Even => -HALF_PI,
    }
}

/// Probe pass on {e,g} ⊗ field: R₂ · U_disp(π/2) · R₁ followed by removal of
/// the common field rotation e^{iπn/2}. The probe then reads `e` exactly on
/// the protected-parity subspace.
pub fn probe_pass_unitary(cfg: &FockConfig, protected: Parity) -> CMatrix {
    let d = cfg.dim();
    let id = CMatrix::identity(d, d);
    let r1 = kron(&ramsey_unitary(HALF_PI), &id);
    let r2 = kron(&ramsey_unitary(second_pulse_area(protected)), &id);
    let frame = kron(&CMatrix::identity(2, 2), &phase_rotation(-HALF_PI, cfg));
    frame * r2 * dispersive_unitary(HALF_PI, cfg).unitary * r1
}

/// Joint probe ⊗ field state after a probe atom (entering in `e`) crosses
/// R₁–C–R₂, protecting odd parity.
pub fn probe_entangle(rho: &FieldDensity) -> Result<JointState> {
    probe_entangle_with(rho, Parity::Odd)
}

pub fn probe_entangle_with(rho: &FieldDensity, protected: Parity) -> Result<JointState> {
    let cfg = FockConfig::new(rho.dim())?;
    let joint = JointState::product(&[(PROBE, &projector(2, AtomLevel::E.index())), (FIELD, rho.matrix())])?;
    joint.conjugate_local(&probe_pass_unitary(&cfg, protected), &[PROBE, FIELD])
}

/// Atom-diagonal field block ⟨level|ρ_joint|level⟩ of a probe ⊗ field state.
pub fn atom_block(joint: &JointState, level: AtomLevel) -> Result<CMatrix> {
    let atom_dim = joint.factors()[0].dim;
    let field_dim = joint.factors().last().map(|f| f.dim).unwrap_or(0);
    if joint.factors().len() != 2 || level.index() >= atom_dim {
        return Err(Error::InvalidParameter("expected an atom ⊗ field state".into()));
    }
    let k = level.index() * field_dim;
    Ok(joint.matrix().view((k, k), (field_dim, field_dim)).into_owned())
}

/// Factor list of the four-party cycle state.
pub fn cycle_factors(field_dim: usize) -> Vec<Factor> {
    vec![Factor::new(PROBE, 3), Factor::new(FEEDBACK, 3), Factor::new(CPRIME, 2), Factor::new(FIELD, field_dim)]
}

/// |e⟩_p ⊗ |i⟩_f ⊗ |0⟩_{C′} ⊗ ρ
pub fn initial_cycle_state(rho: &FieldDensity) -> Result<JointState> {
    JointState::product(&[
        (PROBE, &projector(3, AtomLevel::E.index())),
        (FEEDBACK, &projector(3, AtomLevel::I.index())),
        (CPRIME, &projector(2, 0)),
        (FIELD, rho.matrix()),
    ])
}

/// Gates of one corrective pass, lifted to three-level atoms.
pub struct CycleGates {
    probe_pass: CMatrix,
    swap: CMatrix,
    fb_pi: CMatrix,
    injection: InjectionGate,
    injection_lifted: CMatrix,
    field_dim: usize,
}

impl CycleGates {
    pub fn new(cfg: &FockConfig, protected: Parity, phase: SwapPhase, injection_efficiency: f64) -> Result<Self> {
        let d = cfg.dim();
        let injection = photon_injection_with_efficiency(cfg, injection_efficiency)?;
        Ok(Self {
            probe_pass: lift_atom_field_to_three_level(&probe_pass_unitary(cfg, protected), d),
            swap: cprime_pi_pulse(phase),
            fb_pi: lift_to_three_level(&ramsey_unitary(PI)),
            injection_lifted: lift_atom_field_to_three_level(&injection.unitary, d),
            injection,
            field_dim: d,
        })
    }
}

pub fn probe_pass(joint: &JointState, gates: &CycleGates) -> Result<JointState> {
    joint.conjugate_local(&gates.probe_pass, &[PROBE, FIELD])
}

fn excited_population(joint: &JointState, label: &str) -> Result<f64> {
    let red = joint.partial_trace(&[label])?;
    Ok(red.matrix()[(1, 1)].re)
}

/// Probe then feedback atom cross the empty auxiliary cavity.
///
/// Fails if C′ holds a photon on entry: the reset pathway in the cycle map
/// is the only place an occupied C′ is discarded.
pub fn cprime_transfer(joint: &JointState, gates: &CycleGates) -> Result<JointState> {
    let occupied = excited_population(joint, CPRIME)?;
    if occupied > 1e-10 {
        return Err(Error::AuxiliaryNotVacuum(occupied));
    }
    let after_probe = joint.conjugate_local(&gates.swap, &[PROBE, CPRIME])?;
    after_probe.conjugate_local(&gates.swap, &[FEEDBACK, CPRIME])
}

pub struct InjectionOutcome {
    pub state: JointState,
    /// Population that reached the adiabatic passage in |e, D−1⟩.
    pub edge_population: f64,
}

/// π pulse g ↔ e on the feedback atom, then adiabatic photon injection
/// (successful with the gate's efficiency; otherwise the field is untouched).
pub fn feedback_injection(joint: &JointState, gates: &CycleGates) -> Result<InjectionOutcome> {
    let flipped = joint.conjugate_local(&gates.fb_pi, &[FEEDBACK])?;
    let fb_field = flipped.partial_trace(&[FEEDBACK, FIELD])?;
    let k = AtomLevel::E.index() * gates.field_dim + gates.field_dim - 1;
    let edge_population = fb_field.matrix()[(k, k)].re;
    let injected = flipped.conjugate_local(&gates.injection_lifted, &[FEEDBACK, FIELD])?;
    let eff = gates.injection.efficiency;
    let state = if eff < 1.0 { JointState::mix(&[(eff, injected), (1.0 - eff, flipped)])? } else { injected };
    Ok(InjectionOutcome { state, edge_population })
}

/// Probe pass, C′ transfer and feedback injection on a joint density matrix.
pub fn corrective_pass(rho: &FieldDensity, gates: &CycleGates) -> Result<InjectionOutcome> {
    let joint = initial_cycle_state(rho)?;
    let probed = probe_pass(&joint, gates)?;
    let transferred = cprime_transfer(&probed, gates)?;
    feedback_injection(&transferred, gates)
}

/// Field-only Kraus operators of the corrective pass, read off the four-party
/// unitary: K_{p,f,c}[m, n] = ⟨p, f, c, m| U |e, i, 0, n⟩.
pub fn multipartite_corrective_kraus(
    cfg: &FockConfig,
    protected: Parity,
    phase: SwapPhase,
    injection_efficiency: f64,
) -> Result<KrausChannel> {
    let gates = CycleGates::new(cfg, protected, phase, injection_efficiency)?;
    let d = cfg.dim();
    let layout = Layout::new(cycle_factors(d))?;
    let probe = LocalOp::new(&layout, &gates.probe_pass, &[PROBE, FIELD])?;
    let swap_p = LocalOp::new(&layout, &gates.swap, &[PROBE, CPRIME])?;
    let swap_f = LocalOp::new(&layout, &gates.swap, &[FEEDBACK, CPRIME])?;
    let flip = LocalOp::new(&layout, &gates.fb_pi, &[FEEDBACK])?;
    let inject = LocalOp::new(&layout, &gates.injection_lifted, &[FEEDBACK, FIELD])?;

    let mut branches: Vec<(f64, Vec<CVector>)> =
        vec![(injection_efficiency, Vec::new()), (1.0 - injection_efficiency, Vec::new())];
    for n in 0..d {
        let start = layout.index(&[AtomLevel::E.index(), AtomLevel::I.index(), 0, n]);
        let mut v = CVector::zeros(layout.dim());
        v[start] = C64::from(1.0);
        let v = flip.apply_vector(&swap_f.apply_vector(&swap_p.apply_vector(&probe.apply_vector(&v))));
        branches[0].1.push(inject.apply_vector(&v));
        branches[1].1.push(v);
    }

    let mut ops = Vec::new();
    for (weight, outputs) in &branches {
        if *weight == 0.0 {
            continue;
        }
        let scale = C64::from(weight.sqrt());
        for env in 0..layout.dim() / d {
            let k = CMatrix::from_fn(d, d, |m, n| outputs[n][env * d + m] * scale);
            if k.iter().any(|c| *c != ZERO) {
                ops.push(k);
            }
        }
    }
    KrausChannel::new("multipartite corrective pass", ops)
}

/// Probe atom without a feedback atom: the photon it may leave in C′ is
/// discarded before the next cycle. Read off the probe ⊗ C′ ⊗ field unitary.
pub fn multipartite_probe_only_kraus(cfg: &FockConfig, protected: Parity) -> Result<KrausChannel> {
    let gates = CycleGates::new(cfg, protected, SwapPhase::Resonant, 1.0)?;
    let d = cfg.dim();
    let layout = Layout::new(vec![Factor::new(PROBE, 3), Factor::new(CPRIME, 2), Factor::new(FIELD, d)])?;
    let probe = LocalOp::new(&layout, &gates.probe_pass, &[PROBE, FIELD])?;
    let swap = LocalOp::new(&layout, &gates.swap, &[PROBE, CPRIME])?;
    let outputs: Vec<CVector> = (0..d)
        .map(|n| {
            let mut v = CVector::zeros(layout.dim());
            v[layout.index(&[AtomLevel::E.index(), 0, n])] = C64::from(1.0);
            swap.apply_vector(&probe.apply_vector(&v))
        })
        .collect();
    let ops = (0..layout.dim() / d)
        .map(|env| CMatrix::from_fn(d, d, |m, n| outputs[n][env * d + m]))
        .filter(|k| k.iter().any(|c| *c != ZERO))
        .collect();
    KrausChannel::new("multipartite probe-only pass", ops)
}

/// Oracle for the corrective pass: ρ ↦ P_keep ρ P_keep + η S P_flip ρ P_flip S†
/// + (1 − η) P_flip ρ P_flip.
pub fn analytic_correction(cfg: &FockConfig, protected: Parity, injection_efficiency: f64) -> Result<KrausChannel> {
    let p = parity_projectors(cfg);
    let (keep, flip) = match protected {
        Parity::Odd => (p.odd.matrix, p.even.matrix),
        Parity::Even => (p.even.matrix, p.odd.matrix),
    };
    let s = shift_operator(cfg);
    let mut ops = vec![keep, &s * &flip * C64::from(injection_efficiency.sqrt())];
    if injection_efficiency < 1.0 {
        ops.push(flip * C64::from((1.0 - injection_efficiency).sqrt()));
    }
    KrausChannel::new("analytic correction", ops)
}

/// ρ ↦ P_odd ρ P_odd + P_even ρ P_even.
pub fn parity_dephasing(cfg: &FockConfig) -> KrausChannel {
    let p = parity_projectors(cfg);
    KrausChannel::new("parity dephasing", vec![p.even.matrix, p.odd.matrix]).expect("projectors are square")
}

/// Which atoms crossed the cavity in a cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomEvent {
    Both,
    ProbeOnly,
    /// No probe atom; a lone feedback atom in `i` does nothing.
    NoProbe,
}

/// One-cycle field map with its cached superoperator.
#[derive(Clone, Debug)]
pub struct CycleChannel {
    pub damping: DampingChannel,
    pub correction: KrausChannel,
    pub probe_only: KrausChannel,
    pub kraus: KrausChannel,
    superop: SuperOperator,
    /// Nonzero entries of the superoperator, column-compressed.
    action: Vec<Vec<(usize, C64)>>,
    weights: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrectionModel {
    /// Field map extracted from the four-party simulation.
    Multipartite,
    /// Projector-algebra oracle.
    Analytic,
}

pub fn cycle_channel(cfg: &FeedbackConfig) -> Result<CycleChannel> {
    cycle_channel_with(cfg, CorrectionModel::Multipartite)
}

pub fn cycle_channel_with(cfg: &FeedbackConfig, model: CorrectionModel) -> Result<CycleChannel> {
    let fock = cfg.validate()?;
    let damping = damping_channel(cfg.gamma_tau, &fock)?;
    let (correction, probe_only) = match model {
        CorrectionModel::Multipartite => (
            multipartite_corrective_kraus(&fock, cfg.protected_parity, SwapPhase::Resonant, cfg.injection_efficiency)?,
            multipartite_probe_only_kraus(&fock, cfg.protected_parity)?,
        ),
        CorrectionModel::Analytic => {
            (analytic_correction(&fock, cfg.protected_parity, cfg.injection_efficiency)?, parity_dephasing(&fock))
        }
    };
    let weights = [cfg.p_probe * cfg.p_fb, cfg.p_probe * (1.0 - cfg.p_fb), 1.0 - cfg.p_probe];
    let identity = KrausChannel::identity(fock.dim());
    let atoms = KrausChannel::mixture(
        "atom presence mixture",
        &[(weights[0], &correction), (weights[1], &probe_only), (weights[2], &identity)],
    )?;
    let kraus = atoms.after(damping.kraus())?;
    let superop = kraus.superoperator();
    let n = superop.matrix().ncols();
    let action = (0..n)
        .map(|col| {
            superop.matrix().column(col).iter().enumerate().filter(|(_, c)| **c != ZERO).map(|(r, c)| (r, *c)).collect()
        })
        .collect();
    Ok(CycleChannel { damping, correction, probe_only, kraus, superop, action, weights })
}

impl CycleChannel {
    pub fn superoperator_ref(&self) -> &SuperOperator {
        &self.superop
    }

    /// Probabilities of (both atoms, probe only, no probe).
    pub fn event_weights(&self) -> [f64; 3] {
        self.weights
    }

    /// One cycle conditioned on a given atom event.
    pub fn apply_event(&self, rho: &FieldDensity, event: AtomEvent) -> Result<FieldDensity> {
        let damped = self.damping.apply(rho)?;
        match event {
            AtomEvent::Both => self.correction.apply(&damped),
            AtomEvent::ProbeOnly => self.probe_only.apply(&damped),
            AtomEvent::NoProbe => Ok(damped),
        }
    }

    pub fn sample_event<R: Rng>(&self, cfg: &FeedbackConfig, rng: &mut R) -> AtomEvent {
        let probe = rng.random::<f64>() < cfg.p_probe;
        let fb = rng.random::<f64>() < cfg.p_fb;
        match (probe, fb) {
            (true, true) => AtomEvent::Both,
            (true, false) => AtomEvent::ProbeOnly,
            (false, _) => AtomEvent::NoProbe,
        }
    }
}

impl Channel for CycleChannel {
    fn dim(&self) -> usize {
        self.superop.dim()
    }

    /// Cached-superoperator application.
    fn apply(&self, rho: &FieldDensity) -> Result<FieldDensity> {
        let d = self.dim();
        if rho.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho.dim() });
        }
        let v = vectorize(rho.matrix());
        let mut out = CVector::zeros(d * d);
        for (col, entries) in self.action.iter().enumerate() {
            let x = v[col];
            if x == ZERO {
                continue;
            }
            for &(row, s) in entries {
                out[row] += s * x;
            }
        }
        FieldDensity::from_matrix(unvectorize(&out, d))
    }

    fn superoperator(&self) -> SuperOperator {
        self.superop.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleReport {
    pub cycle: usize,
    pub gamma_t: f64,
    pub fidelity: f64,
    pub parity: f64,
    pub coherence: f64,
    pub min_wigner: Option<f64>,
    pub state: Option<FieldDensity>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Cycles whose field state is kept in the report.
    pub snapshot_at: BTreeSet<usize>,
    /// (extent, n_points) of a Wigner grid whose minimum is reported each cycle.
    pub wigner_min: Option<(f64, usize)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub reports: Vec<CycleReport>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn last(&self) -> &CycleReport {
        self.reports.last().expect("a run always reports cycle 0")
    }

    pub fn final_state(&self) -> Option<&FieldDensity> {
        self.last().state.as_ref()
    }

    pub fn coherence_series(&self) -> Vec<(f64, f64)> {
        self.reports.iter().map(|r| (r.gamma_t, r.coherence)).collect()
    }
}

struct Reporter<'a> {
    target: PureFieldState,
    amplitude: C64,
    fock: FockConfig,
    opts: &'a RunOptions,
    warnings: Vec<String>,
    last_cycle: usize,
}

impl<'a> Reporter<'a> {
    fn new(cfg: &FeedbackConfig, fock: FockConfig, opts: &'a RunOptions, last_cycle: usize) -> Result<Self> {
        let amplitude = cfg.cat_amplitude();
        Ok(Self {
            target: cat_state(amplitude, cfg.protected_parity, &fock)?,
            amplitude,
            fock,
            opts,
            warnings: Vec::new(),
            last_cycle,
        })
    }

    fn report(&mut self, cycle: usize, gamma_t: f64, rho: &FieldDensity) -> Result<CycleReport> {
        let tail = rho.tail_population();
        if let Err(e) = self.fock.check_tail(tail) {
            self.warnings.push(format!("cycle {cycle}: {e}"));
        }
        let alpha_t = self.amplitude * (-0.5 * gamma_t).exp();
        let min_wigner = match self.opts.wigner_min {
            Some((extent, n)) => Some(wigner_grid(rho, extent, n)?.min_value()),
            None => None,
        };
        let keep = self.opts.snapshot_at.contains(&cycle) || cycle == self.last_cycle;
        Ok(CycleReport {
            cycle,
            gamma_t,
            fidelity: fidelity(rho, &self.target),
            parity: parity_expectation(rho),
            coherence: cat_coherence(rho, alpha_t)?,
            min_wigner,
            state: keep.then(|| rho.clone()),
        })
    }
}

/// Initial field: the cat heralded by the preparation atom.
pub fn initial_state(cfg: &FeedbackConfig) -> Result<FieldDensity> {
    let fock = cfg.validate()?;
    prepare_cat_conditional(cfg.alpha, cfg.heralding_level(), &fock)
}

pub fn run_feedback(cfg: &FeedbackConfig) -> Result<RunOutput> {
    run_feedback_with(cfg, &RunOptions::default())
}

pub fn run_feedback_with(cfg: &FeedbackConfig, opts: &RunOptions) -> Result<RunOutput> {
    let fock = cfg.validate()?;
    let channel = cycle_channel(cfg)?;
    let rho0 = initial_state(cfg)?;
    match cfg.mode {
        EvolutionMode::EnsembleAverage => run_cycles(cfg, fock, opts, rho0, |rho, _| channel.apply(rho)),
        EvolutionMode::Trajectory => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.expect("validated"));
            run_cycles(cfg, fock, opts, rho0, |rho, _| {
                let event = channel.sample_event(cfg, &mut rng);
                channel.apply_event(rho, event)
            })
        }
    }
}

fn run_cycles(
    cfg: &FeedbackConfig,
    fock: FockConfig,
    opts: &RunOptions,
    rho0: FieldDensity,
    mut step: impl FnMut(&FieldDensity, usize) -> Result<FieldDensity>,
) -> Result<RunOutput> {
    let mut reporter = Reporter::new(cfg, fock, opts, cfg.n_cycles)?;
    let mut reports = Vec::with_capacity(cfg.n_cycles + 1);
    let mut rho = rho0;
    reports.push(reporter.report(0, 0.0, &rho)?);
    for cycle in 1..=cfg.n_cycles {
        rho = step(&rho, cycle)?;
        reports.push(reporter.report(cycle, cycle as f64 * cfg.gamma_tau, &rho)?);
    }
    Ok(RunOutput { reports, warnings: reporter.warnings })
}

/// Per-cycle fidelities of `count` independent trajectories; trajectory `k`
/// draws from stream `k` of the seeded generator.
pub fn trajectory_fidelities(cfg: &FeedbackConfig, count: usize) -> Result<Vec<Vec<f64>>> {
    let fock = cfg.validate()?;
    let seed = cfg.seed.ok_or_else(|| Error::InvalidParameter("trajectory mode requires a seed".into()))?;
    let channel = cycle_channel(cfg)?;
    let rho0 = initial_state(cfg)?;
    let target = cat_state(cfg.cat_amplitude(), cfg.protected_parity, &fock)?;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut rho = rho0.clone();
            let mut fids = vec![fidelity(&rho, &target)];
            for _ in 0..cfg.n_cycles {
                let event = channel.sample_event(cfg, &mut rng);
                rho = channel.apply_event(&rho, event)?;
                fids.push(fidelity(&rho, &target));
            }
            Ok(fids)
        })
        .collect()
}

/// Damping-only evolution of the heralded cat over `n_steps` equal steps.
pub fn run_free_decay(alpha: C64, gamma_t_total: f64, n_steps: usize, cfg: &FeedbackConfig) -> Result<RunOutput> {
    run_free_decay_with(alpha, gamma_t_total, n_steps, cfg, &RunOptions::default())
}

pub fn run_free_decay_with(
    alpha: C64,
    gamma_t_total: f64,
    n_steps: usize,
    cfg: &FeedbackConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    if !(gamma_t_total >= 0.0) || !gamma_t_total.is_finite() {
        return Err(Error::InvalidParameter(format!("total gamma_t = {gamma_t_total} must be finite and >= 0")));
    }
    let step_gt = if n_steps == 0 { 0.0 } else { gamma_t_total / n_steps as f64 };
    let run_cfg = FeedbackConfig { alpha, gamma_tau: step_gt, n_cycles: n_steps, ..cfg.clone() };
    let fock = run_cfg.validate()?;
    let damping = damping_channel(step_gt, &fock)?;
    let rho0 = initial_state(&run_cfg)?;
    run_cycles(&run_cfg, fock, opts, rho0, |rho, _| damping.apply(rho))
}
