//! Elementary evolutions of the cavity mode and the Rydberg atoms crossing it.
//!
//! Atomic basis order is fixed: `e = 0`, `g = 1`, and for three-level atoms
//! `i = 2`. Two-level gates act on `{e, g}`; their three-level lifts leave
//! `i` untouched. Joint atom–field operators use atom-major ordering.

use std::f64::consts::PI;

use crate::channel::{Channel, KrausChannel, SuperOperator};
use crate::error::{Error, Result};
use crate::fock::{ladder_ops, max_abs, phase_rotation, CMatrix, FieldDensity, FockConfig, C64, I, ONE, ZERO};
use crate::tensor::kron;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AtomLevel {
    E,
    G,
    I,
}

impl AtomLevel {
    pub fn index(self) -> usize {
        match self {
            AtomLevel::E => 0,
            AtomLevel::G => 1,
            AtomLevel::I => 2,
        }
    }
}

/// Exact amplitude damping over a dimensionless time γt.
#[derive(Clone, Debug)]
pub struct DampingChannel {
    gamma_t: f64,
    kraus: KrausChannel,
    /// weights[k][m] = ⟨m|K_k|m+k⟩
    weights: Vec<Vec<f64>>,
}

pub fn damping_channel(gamma_t: f64, cfg: &FockConfig) -> Result<DampingChannel> {
    if !(gamma_t >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma_t must be non-negative, got {gamma_t}")));
    }
    let d = cfg.dim();
    let eta = (-gamma_t).exp();
    let loss = -(-gamma_t).exp_m1();
    let mut weights = vec![vec![0.0; d]; d];
    let mut ops = Vec::with_capacity(d);
    for k in 0..d {
        let mut op = CMatrix::zeros(d, d);
        for n in k..d {
            let w = (binomial(n, k) * eta.powi((n - k) as i32) * loss.powi(k as i32)).sqrt();
            weights[k][n - k] = w;
            op[(n - k, n)] = C64::from(w);
        }
        ops.push(op);
    }
    Ok(DampingChannel { gamma_t, kraus: KrausChannel::new(format!("damping({gamma_t})"), ops)?, weights })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl DampingChannel {
    pub fn gamma_t(&self) -> f64 {
        self.gamma_t
    }

    pub fn kraus(&self) -> &KrausChannel {
        &self.kraus
    }
}

impl Channel for DampingChannel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    /// ρ'ₘₙ = Σₖ wₖ(m) wₖ(n) ρ_{m+k,n+k}, O(D³).
    fn apply(&self, rho: &FieldDensity) -> Result<FieldDensity> {
        let d = self.dim();
        if rho.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho.dim() });
        }
        let src = rho.matrix();
        let out = CMatrix::from_fn(d, d, |m, n| {
            let top = d - m.max(n);
            (0..top).map(|k| src[(m + k, n + k)] * (self.weights[k][m] * self.weights[k][n])).sum()
        });
        FieldDensity::from_matrix(out)
    }

    fn superoperator(&self) -> SuperOperator {
        self.kraus.superoperator()
    }
}

/// 2×2 Ramsey rotation on {e, g}: |e⟩ → cos(θ/2)|e⟩ + sin(θ/2)|g⟩,
/// |g⟩ → −sin(θ/2)|e⟩ + cos(θ/2)|g⟩.
pub fn ramsey_unitary(theta: f64) -> CMatrix {
    let (s, c) = (0.5 * theta).sin_cos();
    CMatrix::from_row_slice(2, 2, &[C64::from(c), C64::from(-s), C64::from(s), C64::from(c)])
}

/// Three-level lift of a two-level {e, g} operator; `i` passes through.
pub fn lift_to_three_level(two: &CMatrix) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m.view_mut((0, 0), (2, 2)).copy_from(two);
    m[(2, 2)] = ONE;
    m
}

/// Same lift for an atom ⊗ field operator (atom-major).
pub fn lift_atom_field_to_three_level(two: &CMatrix, field_dim: usize) -> CMatrix {
    let d = field_dim;
    let mut m = CMatrix::zeros(3 * d, 3 * d);
    m.view_mut((0, 0), (2 * d, 2 * d)).copy_from(two);
    m.view_mut((2 * d, 2 * d), (d, d)).copy_from(&CMatrix::identity(d, d));
    m
}

/// Resonant/detuned Jaynes–Cummings propagator on {e,g} ⊗ field, in the frame
/// rotating at the cavity frequency: H = −δ|e⟩⟨e| + Ω(|e⟩⟨g|a + |g⟩⟨e|a†), δ = ω − ω_eg.
pub fn jc_unitary(omega: f64, delta: f64, t: f64, cfg: &FockConfig) -> CMatrix {
    let d = cfg.dim();
    let l = ladder_ops(cfg);
    let mut raise = CMatrix::zeros(2, 2);
    raise[(0, 1)] = ONE;
    let lower = raise.transpose();
    let mut pe = CMatrix::zeros(2, 2);
    pe[(0, 0)] = ONE;
    let h = kron(&pe, &CMatrix::identity(d, d)) * C64::from(-delta)
        + (kron(&raise, &l.a.matrix) + kron(&lower, &l.a_dag.matrix)) * C64::from(omega);
    (h * (-I * t)).exp()
}

/// Total excitation number |e⟩⟨e| ⊗ 1 + 1 ⊗ a†a on {e,g} ⊗ field.
pub fn excitation_number(cfg: &FockConfig) -> CMatrix {
    let d = cfg.dim();
    let mut pe = CMatrix::zeros(2, 2);
    pe[(0, 0)] = ONE;
    kron(&pe, &CMatrix::identity(d, d)) + kron(&CMatrix::identity(2, 2), &ladder_ops(cfg).n.matrix)
}

/// Dispersive conditional phase gate U = |e⟩⟨e| ⊗ e^{iφn} + |g⟩⟨g| ⊗ e^{−iφn}.
#[derive(Clone, Debug)]
pub struct DispersiveGate {
    pub phi: f64,
    pub unitary: CMatrix,
}

pub fn dispersive_unitary(phi: f64, cfg: &FockConfig) -> DispersiveGate {
    let d = cfg.dim();
    let mut u = CMatrix::zeros(2 * d, 2 * d);
    u.view_mut((0, 0), (d, d)).copy_from(&phase_rotation(phi, cfg));
    u.view_mut((d, d), (d, d)).copy_from(&phase_rotation(-phi, cfg));
    DispersiveGate { phi, unitary: u }
}

/// Phases carried by the resonant swap in C′.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapPhase {
    /// −i on both swapped amplitudes, as produced by a resonant π pulse.
    Resonant,
    /// Phase-free bookkeeping |g,0⟩ ↔ |i,1⟩.
    PhaseFree,
}

/// π pulse in the auxiliary cavity on {e,g,i} ⊗ {0,1}: swaps |g,0⟩ ↔ |i,1⟩,
/// leaves |e,·⟩, |i,0⟩ and |g,1⟩ alone.
pub fn cprime_pi_pulse(phase: SwapPhase) -> CMatrix {
    let idx = |level: AtomLevel, photons: usize| level.index() * 2 + photons;
    let mut u = CMatrix::identity(6, 6);
    let (g0, i1) = (idx(AtomLevel::G, 0), idx(AtomLevel::I, 1));
    let amp = match phase {
        SwapPhase::Resonant => -I,
        SwapPhase::PhaseFree => ONE,
    };
    u[(g0, g0)] = ZERO;
    u[(i1, i1)] = ZERO;
    u[(i1, g0)] = amp;
    u[(g0, i1)] = amp;
    u
}

/// Adiabatic-passage photon injection on {e,g} ⊗ field.
///
/// On the declared domain the map is the isometry |e,n⟩ → |g,n+1⟩ for
/// n < D−1. The operator is completed to a unitary by |g,n+1⟩ → −|e,n⟩, with
/// |g,0⟩ and the edge state |e,D−1⟩ left in place; the edge population is
/// reported by [`InjectionGate::edge_population`].
#[derive(Clone, Debug)]
pub struct InjectionGate {
    pub unitary: CMatrix,
    /// Probability that the passage transfers the photon.
    pub efficiency: f64,
    dim: usize,
}

pub fn photon_injection(cfg: &FockConfig) -> InjectionGate {
    photon_injection_with_efficiency(cfg, 1.0).expect("unit efficiency is valid")
}

pub fn photon_injection_with_efficiency(cfg: &FockConfig, efficiency: f64) -> Result<InjectionGate> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::InvalidParameter(format!("injection efficiency {efficiency} outside [0, 1]")));
    }
    let d = cfg.dim();
    let e = |n: usize| n;
    let g = |n: usize| d + n;
    let mut u = CMatrix::zeros(2 * d, 2 * d);
    for n in 0..d - 1 {
        u[(g(n + 1), e(n))] = ONE;
        u[(e(n), g(n + 1))] = -ONE;
    }
    u[(g(0), g(0))] = ONE;
    u[(e(d - 1), e(d - 1))] = ONE;
    Ok(InjectionGate { unitary: u, efficiency, dim: d })
}

impl InjectionGate {
    /// Population of |e, D−1⟩ in an {e,g} ⊗ field density matrix, the only
    /// input the gate cannot raise.
    pub fn edge_population(&self, atom_field: &CMatrix) -> f64 {
        let k = self.dim - 1;
        atom_field[(k, k)].re
    }

    pub fn field_dim(&self) -> usize {
        self.dim
    }
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    max_abs(&(u.adjoint() * u - CMatrix::identity(u.ncols(), u.ncols()))) <= tol
}

pub const HALF_PI: f64 = PI / 2.0;
