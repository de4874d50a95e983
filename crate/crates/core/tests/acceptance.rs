//! End-to-end acceptance checks. Runs without the libtest harness so each
//! criterion prints exactly one PASS/FAIL line, in order, with wall-clock
//! bounds measured on an otherwise idle process.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use catguard::channel::Channel;
use catguard::dynamics::{dispersive_unitary, jc_unitary, AtomLevel, SwapPhase, HALF_PI};
use catguard::fock::{
    coherent_coefficients, parity_projectors, shift_operator, CMatrix, CVector, FieldDensity, FockConfig, Parity, C64,
    I,
};
use catguard::metrics::{estimate_decoherence_time, FitOptions};
use catguard::protocol::{
    analytic_correction, atom_block, corrective_pass, cprime_transfer, cycle_channel, initial_cycle_state,
    prepare_entangled, probe_entangle, probe_pass, run_feedback_with, run_free_decay, run_free_decay_with, CycleGates,
    FeedbackConfig, RunOptions,
};
use catguard::tensor::{basis_vector, kron_vectors, CPRIME, FEEDBACK};
use catguard::wigner::{negativity_volume, wigner_grid, WignerGrid};
use catguard::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const D: usize = 40;
const EXTENT: f64 = 4.0;
const POINTS: usize = 101;

fn alpha() -> C64 {
    C64::from(3.3f64.sqrt())
}

fn fock() -> FockConfig {
    FockConfig::new(D).unwrap()
}

/// Ginibre-distributed random density matrix.
fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> FieldDensity {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let m = &g * g.adjoint();
    let tr = m.trace();
    FieldDensity::from_matrix(m / tr).unwrap()
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn exact_coherent(beta: C64, dim: usize) -> CVector {
    // independent of the library: e^{−|β|²/2} βⁿ/√n! by direct powers
    CVector::from_fn(dim, |n, _| {
        let mut log_fact = 0.0;
        for k in 1..=n {
            log_fact += (k as f64).ln();
        }
        let mag = (-0.5 * beta.norm_sqr() + n as f64 * beta.norm().max(1e-300).ln() - 0.5 * log_fact).exp();
        if beta.norm() == 0.0 {
            return if n == 0 { C64::from(1.0) } else { C64::from(0.0) };
        }
        C64::from_polar(mag, n as f64 * beta.arg())
    })
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = fock();
    let out = prepare_entangled(alpha(), &cfg);
    let plus = exact_coherent(I * alpha(), D);
    let minus = exact_coherent(-I * alpha(), D);
    let e = basis_vector(2, AtomLevel::E.index());
    let g = basis_vector(2, AtomLevel::G.index());
    let want = (kron_vectors(&[&e, &(&plus - &minus)]) + kron_vectors(&[&g, &(&plus + &minus)])) * C64::from(0.5);
    let want = &want / C64::from(want.norm());
    let fid = want.dotc(&out).norm_sqr() / out.norm_squared();
    let elapsed = start.elapsed();
    outcome(
        fid >= 1.0 - 1e-9 && elapsed < Duration::from_secs(1),
        format!("fidelity 1 - {:.3e}, {:.3} s", 1.0 - fid, elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = fock();
    let p = parity_projectors(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_density(D, &mut rng);
        let joint = probe_entangle(&rho)?;
        let odd = &p.odd.matrix * rho.matrix() * &p.odd.matrix;
        let even = &p.even.matrix * rho.matrix() * &p.even.matrix;
        worst = worst.max(max_abs(&(atom_block(&joint, AtomLevel::E)? - odd)));
        worst = worst.max(max_abs(&(atom_block(&joint, AtomLevel::G)? - even)));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(10),
        format!("max block deviation {worst:.3e}, {:.3} s", elapsed.as_secs_f64()),
    )
}

fn criterion_3() -> Result<Outcome> {
    let cfg = fock();
    let gates = CycleGates::new(&cfg, Parity::Odd, SwapPhase::Resonant, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut vacuum_defect, mut copy_defect): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let rho = random_density(D, &mut rng);
        let probed = probe_pass(&initial_cycle_state(&rho)?, &gates)?;
        let probe = probed.partial_trace(&["probe"])?;
        let transferred = cprime_transfer(&probed, &gates)?;
        let fb = transferred.partial_trace(&[FEEDBACK])?;
        let fb = fb.matrix();
        let (pe, pg) = (probe.matrix()[(0, 0)].re, probe.matrix()[(1, 1)].re);
        copy_defect =
            copy_defect.max((fb[(1, 1)].re - pg).abs()).max((fb[(2, 2)].re - pe).abs()).max(fb[(0, 0)].norm());

        let done = corrective_pass(&rho, &gates)?.state;
        let aux = done.partial_trace(&[CPRIME])?;
        vacuum_defect = vacuum_defect.max((aux.matrix()[(0, 0)].re - 1.0).abs()).max(aux.matrix()[(1, 1)].norm());
    }
    outcome(
        vacuum_defect <= 1e-10 && copy_defect <= 1e-10,
        format!("C′ vacuum defect {vacuum_defect:.3e}, probe→feedback copy defect {copy_defect:.3e}"),
    )
}

fn criterion_4() -> Result<Outcome> {
    let cfg = FeedbackConfig { gamma_tau: 0.0, ..Default::default() };
    let extracted = cycle_channel(&cfg)?.superoperator();
    let f = fock();
    // oracle built from projectors and the shift only
    let p = parity_projectors(&f);
    let s = shift_operator(&f);
    let oracle = catguard::channel::KrausChannel::new("oracle", vec![p.odd.matrix.clone(), &s * &p.even.matrix])?;
    let dist = extracted.max_distance(&oracle.superoperator());
    let lib_oracle = analytic_correction(&f, Parity::Odd, 1.0)?.superoperator();
    let dist_lib = extracted.max_distance(&lib_oracle);
    outcome(dist <= 1e-8 && dist_lib <= 1e-8, format!("superoperator max-norm distance {dist:.3e}"))
}

fn damped_cat(gamma_t: f64) -> FieldDensity {
    let a2 = 3.3f64;
    let beta = I * alpha() * (-0.5 * gamma_t).exp();
    let plus = exact_coherent(beta, D);
    let minus = exact_coherent(-beta, D);
    let n2 = 1.0 / (2.0 * (1.0 - (-2.0 * a2).exp()));
    let cross = (-2.0 * a2 * (1.0 - (-gamma_t).exp())).exp();
    let outer = |x: &CVector, y: &CVector| x * y.adjoint();
    let m = (outer(&plus, &plus) + outer(&minus, &minus)
        - (outer(&plus, &minus) + outer(&minus, &plus)) * C64::from(cross))
        * C64::from(n2);
    FieldDensity::from_matrix(m).unwrap()
}

fn criterion_5() -> Result<Outcome> {
    let cfg = FeedbackConfig::default();
    let mut worst: f64 = 0.0;
    for gt in [0.1, 0.5, 1.0] {
        let run = run_free_decay(alpha(), gt, 10, &cfg)?;
        worst = worst.max(run.final_state().unwrap().trace_distance(&damped_cat(gt)));
    }
    let series = run_free_decay(alpha(), 1.0, 100, &cfg)?.coherence_series();
    let est = estimate_decoherence_time(&series, FitOptions::default())?;
    let ratio = 1.0 / est.t_dec_gamma_units;
    outcome(
        worst <= 1e-8 && (6.0..=7.2).contains(&ratio),
        format!("trace distance {worst:.3e}, (1/γ)/t_dec = {ratio:.4} over {} points", est.points_used),
    )
}

struct ProtectionRuns {
    initial: WignerGrid,
    on_1: WignerGrid,
    off_1: WignerGrid,
    on_2: WignerGrid,
    off_2: WignerGrid,
}

fn protection_runs() -> Result<ProtectionRuns> {
    let one = FeedbackConfig::default();
    let two = FeedbackConfig { n_cycles: 25, gamma_tau: 2.0 / 25.0, ..Default::default() };
    let opts = RunOptions::default();
    let on_1 = run_feedback_with(&one, &opts)?;
    let on_2 = run_feedback_with(&two, &opts)?;
    let off_1 = run_free_decay_with(alpha(), 1.0, 13, &one, &opts)?;
    let off_2 = run_free_decay_with(alpha(), 2.0, 25, &one, &opts)?;
    let grid = |rho: &FieldDensity| wigner_grid(rho, EXTENT, POINTS);
    Ok(ProtectionRuns {
        initial: grid(&on_1.reports[0].state.clone().unwrap_or(catguard::protocol::initial_state(&one)?))?,
        on_1: grid(on_1.final_state().unwrap())?,
        off_1: grid(off_1.final_state().unwrap())?,
        on_2: grid(on_2.final_state().unwrap())?,
        off_2: grid(off_2.final_state().unwrap())?,
    })
}

fn criterion_6(runs: &ProtectionRuns) -> Result<Outcome> {
    let (on_min, off_min) = (runs.on_1.min_value(), runs.off_1.min_value());
    let depth_ok = on_min < 0.0 && off_min.min(0.0).abs() <= 0.25 * on_min.abs();
    let v0 = negativity_volume(&runs.initial);
    let (v_on, v_off) = (negativity_volume(&runs.on_2), negativity_volume(&runs.off_2));
    let volume_ok = v_on > 0.0 && v_off < 0.05 * v0;
    outcome(
        depth_ok && volume_ok,
        format!(
            "γt=1 W_min on {on_min:.4e} off {off_min:.4e}; γt=2 volume on {v_on:.4e} off {v_off:.4e} initial {v0:.4e}"
        ),
    )
}

fn criterion_7() -> Result<Outcome> {
    let mut finals = Vec::new();
    for p in [0.2, 0.6, 1.0] {
        let cfg = FeedbackConfig { p_probe: p, p_fb: p, ..Default::default() };
        finals.push(run_feedback_with(&cfg, &RunOptions::default())?.last().coherence);
    }
    let free = run_free_decay(alpha(), 1.0, 13, &FeedbackConfig::default())?.last().coherence;
    let monotone = finals.windows(2).all(|w| w[1] >= w[0]);
    let ratio = finals[0] / free;
    outcome(
        monotone && ratio < 1.5,
        format!(
            "coherence at γt=1: p=0.2 {:.4e}, p=0.6 {:.4e}, p=1 {:.4e}, free {free:.4e}; p=0.2/free = {ratio:.3}",
            finals[0], finals[1], finals[2]
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let cfg = fock();
    let omega = 1.0;
    let delta = 100.0 * omega;
    let t = HALF_PI * delta / (omega * omega);
    let input = kron_vectors(&[&basis_vector(2, AtomLevel::E.index()), &coherent_coefficients(alpha(), D)]);
    let input = &input / C64::from(input.norm());
    let jc = jc_unitary(omega, delta, t, &cfg) * &input;
    let disp = dispersive_unitary(HALF_PI, &cfg).unitary * &input;
    let fid = jc.dotc(&disp).norm_sqr();
    outcome(fid >= 1.0 - 1e-3, format!("fidelity 1 - {:.3e}", 1.0 - fid))
}

fn criterion_9() -> Result<Outcome> {
    let levels = [0.0, 0.5, 1.0];
    let decays = [0.0, 1.0 / 13.0, 0.5];
    let (mut min_eig, mut tp): (f64, f64) = (f64::INFINITY, 0.0);
    for &p_probe in &levels {
        for &p_fb in &levels {
            for &gamma_tau in &decays {
                let cfg = FeedbackConfig { p_probe, p_fb, gamma_tau, ..Default::default() };
                let s = cycle_channel(&cfg)?.superoperator();
                min_eig = min_eig.min(s.choi_min_eigenvalue());
                tp = tp.max(s.trace_preservation_defect());
            }
        }
    }
    outcome(
        min_eig >= -1e-10 && tp <= 1e-12,
        format!("27 channels: min Choi eigenvalue {min_eig:.3e}, trace defect {tp:.3e}"),
    )
}

fn criterion_10() -> Result<Outcome> {
    let cfg = FeedbackConfig { n_cycles: 25, gamma_tau: 2.0 / 25.0, ..Default::default() };
    let start = Instant::now();
    let t0 = Instant::now();
    let channel = cycle_channel(&cfg)?;
    let assembly = t0.elapsed();
    let mut rho = catguard::protocol::initial_state(&cfg)?;
    let t1 = Instant::now();
    for _ in 0..cfg.n_cycles {
        rho = channel.apply(&rho)?;
    }
    let cycles = t1.elapsed();
    let run = run_feedback_with(&cfg, &RunOptions::default())?;
    let grid = wigner_grid(run.final_state().unwrap(), EXTENT, POINTS)?;
    let total = start.elapsed();
    let consistent =
        max_abs(&(rho.matrix() - run.final_state().unwrap().matrix())) < 1e-12 && grid.values.len() == POINTS * POINTS;
    let ratio = cycles.as_secs_f64() / assembly.as_secs_f64();
    outcome(
        consistent && total < Duration::from_secs(60) && ratio < 3.0,
        format!(
            "assembly {:.3} s, 25 cycles {:.4} s (ratio {ratio:.3}), run + 101×101 grid {:.2} s",
            assembly.as_secs_f64(),
            cycles.as_secs_f64(),
            total.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, res: Result<Outcome>| match res {
        Ok(o) => {
            println!("criterion {n:>2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            if !o.pass {
                failures += 1;
            }
        }
        Err(e) => {
            println!("criterion {n:>2}: FAIL error: {e}");
            failures += 1;
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    match protection_runs() {
        Ok(runs) => report(6, criterion_6(&runs)),
        Err(e) => report(6, Err(e)),
    }
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9());
    report(10, criterion_10());
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
