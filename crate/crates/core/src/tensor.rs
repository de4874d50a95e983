//! Ordered tensor products of labelled factors.
//!
//! The leftmost factor is the slowest-varying index. Within a feedback cycle
//! the global order is `probe ⊗ feedback ⊗ cprime ⊗ field`; every partial
//! trace and local gate addresses factors by label, never by position.

use crate::error::{Error, Result};
use crate::fock::{max_abs, CMatrix, CVector, FieldDensity, C64, ONE, ZERO};

pub const PROBE: &str = "probe";
pub const FEEDBACK: &str = "feedback";
pub const CPRIME: &str = "cprime";
pub const FIELD: &str = "field";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

impl Factor {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Self { label: label.into(), dim }
    }
}

/// Row-major index bookkeeping for a list of factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    factors: Vec<Factor>,
}

impl Layout {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::InvalidDimension(0));
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(Error::InvalidParameter(format!("duplicate factor label `{}`", f.label)));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors.iter().position(|f| f.label == label).ok_or_else(|| Error::UnknownFactor(label.to_string()))
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.factors.len()];
        for k in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.factors[k + 1].dim;
        }
        strides
    }

    /// Flat index of a multi-index.
    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(self.strides()).map(|(d, s)| d * s).sum()
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for k in (0..self.factors.len()).rev() {
            out[k] = index % self.factors[k].dim;
            index /= self.factors[k].dim;
        }
        out
    }

    /// Splits every flat index into (index within `targets`, index within the rest).
    fn split(&self, targets: &[usize]) -> Split {
        let rest: Vec<usize> = (0..self.factors.len()).filter(|k| !targets.contains(k)).collect();
        let sub_dim = |ks: &[usize]| ks.iter().map(|&k| self.factors[k].dim).product::<usize>();
        let target_dim = sub_dim(targets);
        let rest_dim = sub_dim(&rest);
        let mut target_of = Vec::with_capacity(self.dim());
        let mut rest_of = Vec::with_capacity(self.dim());
        let mut compose = vec![0usize; target_dim * rest_dim];
        for flat in 0..self.dim() {
            let d = self.digits(flat);
            let t = targets.iter().fold(0, |acc, &k| acc * self.factors[k].dim + d[k]);
            let r = rest.iter().fold(0, |acc, &k| acc * self.factors[k].dim + d[k]);
            target_of.push(t);
            rest_of.push(r);
            compose[r * target_dim + t] = flat;
        }
        Split { target_dim, target_of, rest_of, compose }
    }
}

struct Split {
    target_dim: usize,
    target_of: Vec<usize>,
    rest_of: Vec<usize>,
    compose: Vec<usize>,
}

impl Split {
    fn flat(&self, rest: usize, target: usize) -> usize {
        self.compose[rest * self.target_dim + target]
    }
}

/// Density matrix on an ordered product of labelled factors.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    matrix: CMatrix,
    layout: Layout,
}

impl JointState {
    pub fn new(matrix: CMatrix, factors: Vec<Factor>) -> Result<Self> {
        let layout = Layout::new(factors)?;
        if !matrix.is_square() || matrix.nrows() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), found: matrix.nrows() });
        }
        Ok(Self { matrix, layout })
    }

    /// Product state ρ₁ ⊗ ρ₂ ⊗ … in the given order.
    pub fn product(parts: &[(&str, &CMatrix)]) -> Result<Self> {
        let factors = parts.iter().map(|(l, m)| Factor::new(*l, m.nrows())).collect();
        let mats: Vec<&CMatrix> = parts.iter().map(|(_, m)| *m).collect();
        Self::new(kron_all(&mats), factors)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn factors(&self) -> &[Factor] {
        self.layout.factors()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Reduced state on `keep` (in the order they appear in this state).
    pub fn partial_trace(&self, keep: &[&str]) -> Result<JointState> {
        let mut keep_pos = keep.iter().map(|l| self.layout.position(l)).collect::<Result<Vec<_>>>()?;
        keep_pos.sort_unstable();
        keep_pos.dedup();
        let split = self.layout.split(&keep_pos);
        let kd = split.target_dim;
        let rest_dim = self.layout.dim() / kd;
        let mut out = CMatrix::zeros(kd, kd);
        for r in 0..rest_dim {
            for i in 0..kd {
                let fi = split.flat(r, i);
                for j in 0..kd {
                    out[(i, j)] += self.matrix[(fi, split.flat(r, j))];
                }
            }
        }
        let factors = keep_pos.iter().map(|&k| self.layout.factors[k].clone()).collect();
        JointState::new(out, factors)
    }

    /// Reduced state of a single field-like factor.
    pub fn reduced(&self, label: &str) -> Result<FieldDensity> {
        FieldDensity::from_matrix(self.partial_trace(&[label])?.matrix)
    }

    /// Returns (O ⊗ 1) ρ (O ⊗ 1)† with `op` acting on `targets` in the listed order.
    pub fn conjugate_local(&self, op: &CMatrix, targets: &[&str]) -> Result<JointState> {
        let local = LocalOp::new(&self.layout, op, targets)?;
        let left = local.left_multiply(&self.matrix);
        let both = local.right_multiply_adjoint(&left);
        Ok(JointState { matrix: both, layout: self.layout.clone() })
    }

    /// Weighted mixture Σ w_k ρ_k of states with identical layout.
    pub fn mix(parts: &[(f64, JointState)]) -> Result<JointState> {
        let first = parts.first().ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let mut m = CMatrix::zeros(first.1.matrix.nrows(), first.1.matrix.ncols());
        for (w, s) in parts {
            if s.layout != first.1.layout {
                return Err(Error::DimensionMismatch { expected: first.1.layout.dim(), found: s.layout.dim() });
            }
            m += &s.matrix * C64::from(*w);
        }
        Ok(JointState { matrix: m, layout: first.1.layout.clone() })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }
}

/// A local operator lifted to a product space; multiplication skips zeros.
pub struct LocalOp {
    split: Split,
    rows: Vec<Vec<(usize, C64)>>,
    dim: usize,
}

impl LocalOp {
    pub fn new(layout: &Layout, op: &CMatrix, targets: &[&str]) -> Result<Self> {
        let pos = targets.iter().map(|l| layout.position(l)).collect::<Result<Vec<_>>>()?;
        let expected: usize = pos.iter().map(|&k| layout.factors[k].dim).product();
        if op.nrows() != expected || op.ncols() != expected {
            return Err(Error::DimensionMismatch { expected, found: op.nrows() });
        }
        let split = layout.split(&pos);
        let rows = (0..expected)
            .map(|i| (0..expected).filter(|&j| op[(i, j)] != ZERO).map(|j| (j, op[(i, j)])).collect())
            .collect();
        Ok(Self { split, rows, dim: layout.dim() })
    }

    pub fn apply_vector(&self, v: &CVector) -> CVector {
        CVector::from_iterator(
            self.dim,
            (0..self.dim).map(|flat| {
                let t = self.split.target_of[flat];
                let r = self.split.rest_of[flat];
                self.rows[t].iter().map(|&(j, c)| c * v[self.split.flat(r, j)]).sum()
            }),
        )
    }

    /// (O ⊗ 1) M
    pub fn left_multiply(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, m.ncols());
        for col in 0..m.ncols() {
            for flat in 0..self.dim {
                let t = self.split.target_of[flat];
                let r = self.split.rest_of[flat];
                let mut acc = ZERO;
                for &(j, c) in &self.rows[t] {
                    acc += c * m[(self.split.flat(r, j), col)];
                }
                out[(flat, col)] = acc;
            }
        }
        out
    }

    /// M (O ⊗ 1)†
    pub fn right_multiply_adjoint(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), self.dim);
        for flat in 0..self.dim {
            let t = self.split.target_of[flat];
            let r = self.split.rest_of[flat];
            for &(j, c) in &self.rows[t] {
                let src = self.split.flat(r, j);
                let cc = c.conj();
                for row in 0..m.nrows() {
                    out[(row, flat)] += m[(row, src)] * cc;
                }
            }
        }
        out
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(mats: &[&CMatrix]) -> CMatrix {
    let mut iter = mats.iter();
    let first = match iter.next() {
        Some(m) => (*m).clone(),
        None => return CMatrix::from_element(1, 1, ONE),
    };
    iter.fold(first, |acc, m| acc.kronecker(m))
}

pub fn kron_vectors(vs: &[&CVector]) -> CVector {
    let mut out = CVector::from_element(1, ONE);
    for v in vs {
        out = out.kronecker(v);
    }
    out
}

/// |k⟩ in a `dim`-dimensional factor.
pub fn basis_vector(dim: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[k] = ONE;
    v
}

pub fn projector(dim: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(k, k)] = ONE;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, FockConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_kron_identity() {
        let a = CMatrix::identity(3, 3);
        let b = CMatrix::identity(4, 4);
        assert_eq!(kron(&a, &b), CMatrix::identity(12, 12));
    }

    #[test]
    fn excited_projector_tensor_field_trace() {
        let cfg = FockConfig::new(6).unwrap();
        let rho = coherent_state(C64::new(0.5, 0.2), &cfg).density();
        let joint = JointState::product(&[("atom", &projector(2, 0)), (FIELD, rho.matrix())]).unwrap();
        assert_abs_diff_eq!((joint.trace() - rho.trace()).norm(), 0.0, epsilon = 1e-14);
        let back = joint.reduced(FIELD).unwrap();
        assert_abs_diff_eq!(max_abs(&(back.matrix() - rho.matrix())), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_trace_scales_by_discarded_trace() {
        let sigma =
            CMatrix::from_row_slice(2, 2, &[C64::from(0.3), C64::new(0.1, 0.2), C64::new(0.1, -0.2), C64::from(0.9)]);
        let rho =
            CMatrix::from_row_slice(2, 2, &[C64::from(0.6), C64::new(0.0, 0.1), C64::new(0.0, -0.1), C64::from(0.4)]);
        let joint = JointState::product(&[("a", &sigma), ("b", &rho)]).unwrap();
        let red = joint.partial_trace(&["b"]).unwrap();
        let expect = &rho * sigma.trace();
        assert_abs_diff_eq!(max_abs(&(red.matrix() - expect)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let s = 0.5f64.sqrt();
        let psi = CVector::from_vec(vec![C64::from(s), ZERO, ZERO, C64::from(s)]);
        let joint = JointState::new(&psi * psi.adjoint(), vec![Factor::new("a", 2), Factor::new("b", 2)]).unwrap();
        let red = joint.partial_trace(&["a"]).unwrap();
        let half = CMatrix::identity(2, 2) * C64::from(0.5);
        assert_abs_diff_eq!(max_abs(&(red.matrix() - half)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn trace_over_everything_is_scalar_one() {
        let joint = JointState::product(&[("a", &projector(3, 1)), ("b", &projector(2, 0))]).unwrap();
        let red = joint.partial_trace(&[]).unwrap();
        assert_eq!(red.matrix().nrows(), 1);
        assert_abs_diff_eq!((red.matrix()[(0, 0)] - ONE).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn unknown_label_is_an_error() {
        let joint = JointState::product(&[("a", &projector(2, 0))]).unwrap();
        assert!(matches!(joint.partial_trace(&["zzz"]), Err(Error::UnknownFactor(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(JointState::new(CMatrix::identity(5, 5), vec![Factor::new("a", 2), Factor::new("b", 2)]).is_err());
    }

    #[test]
    fn local_op_matches_explicit_kronecker() {
        // op on the middle factor of a 2⊗3⊗2 space, and on (c, a) out of order
        let layout = Layout::new(vec![Factor::new("a", 2), Factor::new("b", 3), Factor::new("c", 2)]).unwrap();
        let op = CMatrix::from_fn(3, 3, |i, j| C64::new((i * 3 + j) as f64, (i as f64) - (j as f64)));
        let lifted = kron_all(&[&CMatrix::identity(2, 2), &op, &CMatrix::identity(2, 2)]);
        let m = CMatrix::from_fn(12, 12, |i, j| C64::new(((i * 7 + j) % 5) as f64, ((i + 2 * j) % 3) as f64));
        let local = LocalOp::new(&layout, &op, &["b"]).unwrap();
        assert_abs_diff_eq!(max_abs(&(local.left_multiply(&m) - &lifted * &m)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(max_abs(&(local.right_multiply_adjoint(&m) - &m * lifted.adjoint())), 0.0, epsilon = 1e-12);

        // (c, a) ordering: op2 indexed as c-major
        let op2 = CMatrix::from_fn(4, 4, |i, j| C64::new((i + 1) as f64 * 0.3, j as f64 * 0.1));
        let local2 = LocalOp::new(&layout, &op2, &["c", "a"]).unwrap();
        let mut explicit = CMatrix::zeros(12, 12);
        for i in 0..12 {
            for j in 0..12 {
                let di = layout.digits(i);
                let dj = layout.digits(j);
                if di[1] == dj[1] {
                    explicit[(i, j)] = op2[(di[2] * 2 + di[0], dj[2] * 2 + dj[0])];
                }
            }
        }
        assert_abs_diff_eq!(max_abs(&(local2.left_multiply(&m) - &explicit * &m)), 0.0, epsilon = 1e-12);
        let v = m.column(3).into_owned();
        assert_abs_diff_eq!((local2.apply_vector(&v) - &explicit * &v).norm(), 0.0, epsilon = 1e-12);
    }
}
