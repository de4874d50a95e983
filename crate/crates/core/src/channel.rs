//! Completely positive maps on the field: Kraus lists and cached superoperators.
//!
//! Superoperators act on the row-major vectorization `vec(ρ)[i·D + j] = ρᵢⱼ`,
//! so `S[(i,j),(a,b)] = Σₖ Kₖ[i,a] Kₖ*[j,b]`.

use crate::error::{Error, Result};
use crate::fock::{hermitian_eigenvalues, max_abs, CMatrix, CVector, FieldDensity, C64, ONE, ZERO};

pub trait Channel {
    fn dim(&self) -> usize;
    fn apply(&self, rho: &FieldDensity) -> Result<FieldDensity>;
    fn superoperator(&self) -> SuperOperator;
}

#[derive(Clone, Debug)]
pub struct KrausChannel {
    dim: usize,
    ops: Vec<CMatrix>,
    pub label: String,
}

impl KrausChannel {
    pub fn new(label: impl Into<String>, ops: Vec<CMatrix>) -> Result<Self> {
        let dim = ops.first().map(|k| k.ncols()).ok_or_else(|| Error::InvalidParameter("empty Kraus list".into()))?;
        for k in &ops {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: k.nrows().max(k.ncols()) });
            }
        }
        Ok(Self { dim, ops, label: label.into() })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, ops: vec![CMatrix::identity(dim, dim)], label: "identity".into() }
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    /// ‖Σ K†K − 1‖_max
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for k in &self.ops {
            sum += k.adjoint() * k;
        }
        max_abs(&(sum - CMatrix::identity(self.dim, self.dim)))
    }

    /// `self` after `first`: Kraus set {Aᵢ Bⱼ}, all-zero products dropped.
    pub fn after(&self, first: &KrausChannel) -> Result<KrausChannel> {
        if self.dim != first.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: first.dim });
        }
        let mut ops = Vec::with_capacity(self.ops.len() * first.ops.len());
        for a in &self.ops {
            for b in &first.ops {
                let p = a * b;
                if p.iter().any(|c| *c != ZERO) {
                    ops.push(p);
                }
            }
        }
        if ops.is_empty() {
            ops.push(CMatrix::zeros(self.dim, self.dim));
        }
        Ok(KrausChannel { dim: self.dim, ops, label: format!("{}∘{}", self.label, first.label) })
    }

    /// Probabilistic mixture Σ pᵢ Eᵢ, realized by scaling Kraus operators by √pᵢ.
    pub fn mixture(label: impl Into<String>, parts: &[(f64, &KrausChannel)]) -> Result<KrausChannel> {
        let mut ops = Vec::new();
        let dim = parts.first().map(|(_, c)| c.dim).ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        for (p, ch) in parts {
            if ch.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: ch.dim });
            }
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidParameter(format!("mixture weight {p} outside [0, 1]")));
            }
            if *p == 0.0 {
                continue;
            }
            let s = C64::from(p.sqrt());
            ops.extend(ch.ops.iter().map(|k| k * s));
        }
        if ops.is_empty() {
            ops.push(CMatrix::zeros(dim, dim));
        }
        Ok(KrausChannel { dim, ops, label: label.into() })
    }
}

impl Channel for KrausChannel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, rho: &FieldDensity) -> Result<FieldDensity> {
        check_dim(self.dim, rho)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.ops {
            out += k * rho.matrix() * k.adjoint();
        }
        FieldDensity::from_matrix(out)
    }

    fn superoperator(&self) -> SuperOperator {
        let d = self.dim;
        let mut s = CMatrix::zeros(d * d, d * d);
        for k in &self.ops {
            let nz: Vec<(usize, usize, C64)> = (0..d)
                .flat_map(|i| (0..d).map(move |a| (i, a)))
                .filter(|&(i, a)| k[(i, a)] != ZERO).map(|(i, a)| (i, a, k[(i, a)]))
                .collect();
            for &(i, a, x) in &nz {
                for &(j, b, y) in &nz {
                    s[(i * d + j, a * d + b)] += x * y.conj();
                }
            }
        }
        SuperOperator { dim: d, matrix: s }
    }
}

fn check_dim(dim: usize, rho: &FieldDensity) -> Result<()> {
    if rho.dim() != dim {
        Err(Error::DimensionMismatch { expected: dim, found: rho.dim() })
    } else {
        Ok(())
    }
}

pub fn vectorize(m: &CMatrix) -> CVector {
    let d = m.nrows();
    CVector::from_iterator(d * d, (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]))
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// Dense `D² × D²` matrix of a linear map on field operators.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: CMatrix,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: matrix.nrows() });
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: CMatrix::identity(dim * dim, dim * dim) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `self` after `first`.
    pub fn after(&self, first: &SuperOperator) -> SuperOperator {
        SuperOperator { dim: self.dim, matrix: &self.matrix * &first.matrix }
    }

    pub fn max_distance(&self, other: &SuperOperator) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    /// max over input basis elements |a⟩⟨b| of |tr E(|a⟩⟨b|) − δ_ab|.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let col = a * d + b;
                let tr: C64 = (0..d).map(|i| self.matrix[(i * d + i, col)]).sum();
                let expect = if a == b { ONE } else { ZERO };
                worst = worst.max((tr - expect).norm());
            }
        }
        worst
    }

    /// Choi matrix C[(i,a),(j,b)] = ⟨i|E(|a⟩⟨b|)|j⟩.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d * d, d * d, |row, col| {
            let (i, a) = (row / d, row % d);
            let (j, b) = (col / d, col % d);
            self.matrix[(i * d + j, a * d + b)]
        })
    }

    /// Smallest eigenvalue of the Choi matrix.
    ///
    /// The Choi matrix is split into the connected components of its sparsity
    /// graph first; the spectrum is the union of the component spectra.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let choi = self.choi();
        let herm = (&choi + choi.adjoint()) * C64::from(0.5);
        block_components(&herm)
            .iter()
            .map(|block| {
                let sub = CMatrix::from_fn(block.len(), block.len(), |r, c| herm[(block[r], block[c])]);
                hermitian_eigenvalues(&sub)[0]
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn choi_hermiticity_defect(&self) -> f64 {
        let choi = self.choi();
        max_abs(&(&choi - choi.adjoint()))
    }
}

impl Channel for SuperOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, rho: &FieldDensity) -> Result<FieldDensity> {
        check_dim(self.dim, rho)?;
        let out = &self.matrix * vectorize(rho.matrix());
        FieldDensity::from_matrix(unvectorize(&out, self.dim))
    }

    fn superoperator(&self) -> SuperOperator {
        self.clone()
    }
}

/// A field channel held either as Kraus operators or as a superoperator.
#[derive(Clone, Debug)]
pub enum QuantumChannel {
    Kraus(KrausChannel),
    Superoperator(SuperOperator),
}

impl Channel for QuantumChannel {
    fn dim(&self) -> usize {
        match self {
            QuantumChannel::Kraus(k) => k.dim(),
            QuantumChannel::Superoperator(s) => s.dim(),
        }
    }

    fn apply(&self, rho: &FieldDensity) -> Result<FieldDensity> {
        match self {
            QuantumChannel::Kraus(k) => k.apply(rho),
            QuantumChannel::Superoperator(s) => s.apply(rho),
        }
    }

    fn superoperator(&self) -> SuperOperator {
        match self {
            QuantumChannel::Kraus(k) => k.superoperator(),
            QuantumChannel::Superoperator(s) => s.clone(),
        }
    }
}

pub fn apply_channel(ch: &impl Channel, rho: &FieldDensity) -> Result<FieldDensity> {
    ch.apply(rho)
}

/// Index sets of the connected components of the graph with an edge (r, c)
/// wherever `m[(r, c)] != 0`.
fn block_components(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in 0..n {
        for r in 0..n {
            if r != c && m[(r, c)] != ZERO {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..n {
        let root = find(&mut parent, x);
        groups.entry(root).or_default().push(x);
    }
    groups.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockConfig, PureFieldState};
    use approx::assert_abs_diff_eq;

    fn dephasing(p: f64) -> KrausChannel {
        let z = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, -ONE]));
        KrausChannel::new(
            "dephase",
            vec![CMatrix::identity(2, 2) * C64::from((1.0 - p).sqrt()), z * C64::from(p.sqrt())],
        )
        .unwrap()
    }

    #[test]
    fn kraus_and_superoperator_agree() {
        let ch = dephasing(0.3);
        let rho = FieldDensity::from_matrix(CMatrix::from_row_slice(
            2,
            2,
            &[C64::from(0.5), C64::new(0.2, 0.1), C64::new(0.2, -0.1), C64::from(0.5)],
        ))
        .unwrap();
        let a = ch.apply(&rho).unwrap();
        let b = ch.superoperator().apply(&rho).unwrap();
        assert_abs_diff_eq!(max_abs(&(a.matrix() - b.matrix())), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.matrix()[(0, 1)].re, 0.2 * 0.4, epsilon = 1e-15);
    }

    #[test]
    fn identity_channel_is_noop() {
        let cfg = FockConfig::new(5).unwrap();
        let rho = PureFieldState::fock(3, &cfg).unwrap().density();
        let out = apply_channel(&KrausChannel::identity(5), &rho).unwrap();
        assert_eq!(out, rho);
        assert_eq!(KrausChannel::identity(5).superoperator(), SuperOperator::identity(5));
    }

    #[test]
    fn choi_of_transpose_map_is_not_psd() {
        // ρ ↦ ρᵀ is positive but not completely positive: Choi is the swap.
        let d = 2;
        let mut s = CMatrix::zeros(4, 4);
        for i in 0..d {
            for j in 0..d {
                s[(i * d + j, j * d + i)] = ONE;
            }
        }
        let t = SuperOperator::from_matrix(2, s).unwrap();
        assert_abs_diff_eq!(t.choi_min_eigenvalue(), -1.0, epsilon = 1e-12);
        assert!(t.trace_preservation_defect() < 1e-15);
        assert!(dephasing(0.2).superoperator().choi_min_eigenvalue() > -1e-14);
    }

    #[test]
    fn composition_and_mixture() {
        let a = dephasing(0.1);
        let b = dephasing(0.2);
        let comp = a.after(&b).unwrap();
        let via_super = a.superoperator().after(&b.superoperator());
        assert_abs_diff_eq!(comp.superoperator().max_distance(&via_super), 0.0, epsilon = 1e-15);
        let mix = KrausChannel::mixture("m", &[(0.25, &a), (0.75, &b)]).unwrap();
        assert_abs_diff_eq!(mix.completeness_defect(), 0.0, epsilon = 1e-15);
        assert!(KrausChannel::mixture("bad", &[(1.5, &a)]).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cfg = FockConfig::new(3).unwrap();
        let rho = FieldDensity::vacuum(&cfg);
        assert!(dephasing(0.1).apply(&rho).is_err());
    }

    #[test]
    fn components_split_block_diagonal() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 2)] = ONE;
        m[(2, 0)] = ONE;
        m[(1, 1)] = ONE;
        let comps = block_components(&m);
        assert_eq!(comps, vec![vec![0, 2], vec![1], vec![3]]);
    }
}
