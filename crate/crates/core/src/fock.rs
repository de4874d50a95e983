//! Truncated Fock-space algebra for a single bosonic mode.
//!
//! States live on `|0⟩ … |D−1⟩`. Everything is dense: `D` stays below 64 in
//! every scenario, so the `D²`-sized superoperators are still cheap.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default bound on the population of the two highest Fock levels.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockConfig {
    dim: usize,
    truncation_tol: f64,
}

impl FockConfig {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_tolerance(dim, DEFAULT_TRUNCATION_TOL)
    }

    pub fn with_tolerance(dim: usize, truncation_tol: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if !(truncation_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation tolerance must be positive, got {truncation_tol}"
            )));
        }
        Ok(Self { dim, truncation_tol })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation_tol(&self) -> f64 {
        self.truncation_tol
    }

    /// Errors if `tail` (population of the two top levels) exceeds the tolerance.
    pub fn check_tail(&self, tail: f64) -> Result<()> {
        if tail > self.truncation_tol {
            Err(Error::TruncationOverflow { tail, tol: self.truncation_tol })
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Normalized state vector of the cavity mode.
#[derive(Clone, Debug, PartialEq)]
pub struct PureFieldState {
    amplitudes: CVector,
}

impl PureFieldState {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension(amplitudes.len()));
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroProbabilityBranch);
        }
        Ok(Self { amplitudes: amplitudes / C64::from(norm) })
    }

    pub fn fock(n: usize, cfg: &FockConfig) -> Result<Self> {
        if n >= cfg.dim() {
            return Err(Error::DimensionMismatch { expected: cfg.dim(), found: n + 1 });
        }
        let mut v = CVector::zeros(cfg.dim());
        v[n] = ONE;
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn density(&self) -> FieldDensity {
        FieldDensity { matrix: &self.amplitudes * self.amplitudes.adjoint() }
    }

    /// Population of the two highest Fock levels.
    pub fn tail_population(&self) -> f64 {
        let d = self.dim();
        self.amplitudes.iter().skip(d - 2).map(|c| c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &PureFieldState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// Density matrix of the cavity mode.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDensity {
    matrix: CMatrix,
}

/// Tolerances every emitted density matrix must satisfy.
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityCheck {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
}

impl DensityCheck {
    pub fn is_valid(&self) -> bool {
        self.hermiticity_defect <= HERMITICITY_TOL && self.trace_defect <= TRACE_TOL && self.min_eigenvalue >= -PSD_TOL
    }
}

impl FieldDensity {
    /// Wraps a matrix without validation; see [`FieldDensity::check`].
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        Ok(Self { matrix })
    }

    pub fn vacuum(cfg: &FockConfig) -> Self {
        let mut m = CMatrix::zeros(cfg.dim(), cfg.dim());
        m[(0, 0)] = ONE;
        Self { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn population(&self, n: usize) -> f64 {
        self.matrix[(n, n)].re
    }

    pub fn tail_population(&self) -> f64 {
        let d = self.dim();
        (d - 2..d).map(|n| self.population(n)).sum()
    }

    pub fn expectation(&self, op: &CMatrix) -> C64 {
        (&self.matrix * op).trace()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.population(n)).sum()
    }

    pub fn check(&self) -> DensityCheck {
        let herm = max_abs(&(&self.matrix - self.matrix.adjoint()));
        let trace_defect = (self.trace() - ONE).norm();
        let min_eigenvalue = hermitian_eigenvalues(&self.matrix).iter().cloned().fold(f64::INFINITY, f64::min);
        DensityCheck { hermiticity_defect: herm, trace_defect, min_eigenvalue }
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &FieldDensity) -> f64 {
        let diff = &self.matrix - &other.matrix;
        let herm = (&diff + diff.adjoint()) * C64::from(0.5);
        0.5 * hermitian_eigenvalues(&herm).iter().map(|e| e.abs()).sum::<f64>()
    }

    /// Re-embeds into a space of another dimension: pads with zeros, or drops
    /// the top levels if their population is within tolerance.
    pub fn embed(&self, cfg: &FockConfig) -> Result<FieldDensity> {
        let d = cfg.dim();
        let src = self.dim();
        let mut m = CMatrix::zeros(d, d);
        let keep = d.min(src);
        m.view_mut((0, 0), (keep, keep)).copy_from(&self.matrix.view((0, 0), (keep, keep)));
        if d < src {
            let dropped: f64 = (d..src).map(|n| self.population(n)).sum();
            cfg.check_tail(dropped)?;
        }
        Ok(FieldDensity { matrix: m })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    pub matrix: CMatrix,
    pub label: String,
}

impl Operator {
    pub fn new(label: impl Into<String>, matrix: CMatrix) -> Self {
        Self { matrix, label: label.into() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, state: &PureFieldState) -> Result<CVector> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.dim() });
        }
        Ok(&self.matrix * state.amplitudes())
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::from(0.5);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Unnormalized coherent-state coefficients `e^{−|α|²/2} αⁿ/√n!` for n < dim.
pub fn coherent_coefficients(alpha: C64, dim: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[0] = C64::from((-0.5 * alpha.norm_sqr()).exp());
    for n in 1..dim {
        v[n] = v[n - 1] * alpha / (n as f64).sqrt();
    }
    v
}

/// Coherent state |α⟩, renormalized on the truncated space.
///
/// A tail population above the configured tolerance is logged; callers that
/// must fail on overflow check [`PureFieldState::tail_population`] via
/// [`FockConfig::check_tail`].
pub fn coherent_state(alpha: C64, cfg: &FockConfig) -> PureFieldState {
    let state = PureFieldState::new(coherent_coefficients(alpha, cfg.dim()))
        .expect("coherent coefficients have nonzero vacuum amplitude");
    if let Err(e) = cfg.check_tail(state.tail_population()) {
        log::warn!("coherent_state({alpha}): {e}");
    }
    state
}

/// Cat state N_±(|α⟩ ± |−α⟩); the wrong-parity levels are exactly zero.
pub fn cat_state(alpha: C64, parity: Parity, cfg: &FockConfig) -> Result<PureFieldState> {
    if parity == Parity::Odd && alpha.norm() == 0.0 {
        return Err(Error::OddCatAtOrigin);
    }
    let mut v = coherent_coefficients(alpha, cfg.dim());
    for (n, c) in v.iter_mut().enumerate() {
        if Parity::of(n) != parity {
            *c = ZERO;
        }
    }
    let state = PureFieldState::new(v)?;
    if let Err(e) = cfg.check_tail(state.tail_population()) {
        log::warn!("cat_state({alpha}, {parity:?}): {e}");
    }
    Ok(state)
}

/// Analytic squared normalization N_±² = 1 / (2(1 ± e^{−2|α|²})) of the untruncated cat.
pub fn cat_normalization_sq(alpha: C64, parity: Parity) -> f64 {
    let overlap = (-2.0 * alpha.norm_sqr()).exp();
    1.0 / (2.0 * (1.0 + parity.sign() * overlap))
}

pub struct LadderOps {
    pub a: Operator,
    pub a_dag: Operator,
    pub n: Operator,
}

pub fn ladder_ops(cfg: &FockConfig) -> LadderOps {
    let d = cfg.dim();
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    let a_dag = a.adjoint();
    let n = &a_dag * &a;
    LadderOps { a: Operator::new("a", a), a_dag: Operator::new("a_dag", a_dag), n: Operator::new("n", n) }
}

pub fn number_diagonal(cfg: &FockConfig) -> Vec<f64> {
    (0..cfg.dim()).map(|n| n as f64).collect()
}

pub struct ParityProjectors {
    pub even: Operator,
    pub odd: Operator,
}

pub fn parity_projectors(cfg: &FockConfig) -> ParityProjectors {
    let d = cfg.dim();
    let diag = |p: Parity| {
        CMatrix::from_diagonal(&CVector::from_iterator(d, (0..d).map(|n| if Parity::of(n) == p { ONE } else { ZERO })))
    };
    ParityProjectors {
        even: Operator::new("P_even", diag(Parity::Even)),
        odd: Operator::new("P_odd", diag(Parity::Odd)),
    }
}

/// Parity operator (−1)^n = P_even − P_odd.
pub fn parity_operator(cfg: &FockConfig) -> CMatrix {
    let d = cfg.dim();
    CMatrix::from_diagonal(&CVector::from_iterator(d, (0..d).map(|n| C64::from(Parity::of(n).sign()))))
}

/// Photon shift S = Σ_{n<D−1} |n+1⟩⟨n|.
pub fn shift_operator(cfg: &FockConfig) -> CMatrix {
    let d = cfg.dim();
    let mut s = CMatrix::zeros(d, d);
    for n in 0..d - 1 {
        s[(n + 1, n)] = ONE;
    }
    s
}

/// Phase rotation e^{iθn}.
pub fn phase_rotation(theta: f64, cfg: &FockConfig) -> CMatrix {
    let d = cfg.dim();
    CMatrix::from_diagonal(&CVector::from_iterator(d, (0..d).map(|n| C64::from_polar(1.0, theta * n as f64))))
}

/// D(β) = exp(βa† − β*a) on the truncated space.
pub fn displacement_op(beta: C64, cfg: &FockConfig) -> Operator {
    let l = ladder_ops(cfg);
    let generator = &l.a_dag.matrix * beta - &l.a.matrix * beta.conj();
    Operator::new(format!("D({beta})"), generator.exp())
}

/// Exact Fock matrix elements ⟨m|D(β)|n⟩ of the untruncated displacement
/// operator for m, n < dim (generalized Laguerre form).
pub fn displacement_elements(beta: C64, dim: usize) -> CMatrix {
    let x = beta.norm_sqr();
    let gauss = (-0.5 * x).exp();
    let mut out = CMatrix::zeros(dim, dim);
    // log n! table for the √(n!/m!) prefactors
    let mut log_fact = vec![0.0f64; dim];
    for k in 1..dim {
        log_fact[k] = log_fact[k - 1] + (k as f64).ln();
    }
    for k in 0..dim {
        // L_m^{(k)}(x) for m = 0 .. dim-1-k via the three-term recurrence
        let lag = laguerre_series(k as f64, x, dim - k);
        let beta_k = beta.powu(k as u32);
        let mbeta_conj_k = (-beta.conj()).powu(k as u32);
        for (m, l) in lag.iter().enumerate() {
            let ratio = (0.5 * (log_fact[m] - log_fact[m + k])).exp();
            let mag = gauss * ratio * l;
            // ⟨m+k|D|m⟩ = √(m!/(m+k)!) β^k e^{−x/2} L_m^{(k)}(x)
            out[(m + k, m)] = beta_k * mag;
            if k > 0 {
                // ⟨m|D|m+k⟩ = √(m!/(m+k)!) (−β*)^k e^{−x/2} L_m^{(k)}(x)
                out[(m, m + k)] = mbeta_conj_k * mag;
            }
        }
    }
    out
}

fn laguerre_series(alpha: f64, x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(1.0);
    if len == 1 {
        return out;
    }
    out.push(1.0 + alpha - x);
    for m in 1..len - 1 {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0 + alpha - x) * out[m] - (mf + alpha) * out[m - 1]) / (mf + 1.0);
        out.push(next);
    }
    out
}
