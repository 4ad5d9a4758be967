//! Dense complex linear algebra for up to four polarization qubits.
//!
//! Basis convention: `H ↦ 0`, `V ↦ 1`. Composite indices are big-endian in
//! label order, so the first label of a state is the most significant bit.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 4;

/// Branch probabilities below this are treated as impossible.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let z = self[(r, c)];
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        CMatrix { dim, data }
    }

    /// Build from row-major complex entries. Panics if `entries` is not square.
    pub fn from_rows(entries: &[C64]) -> Self {
        let dim = isqrt(entries.len());
        assert_eq!(dim * dim, entries.len(), "entries must form a square matrix");
        CMatrix { dim, data: entries.to_vec() }
    }

    pub fn from_real(entries: &[f64]) -> Self {
        let dim = isqrt(entries.len());
        assert_eq!(dim * dim, entries.len(), "entries must form a square matrix");
        CMatrix { dim, data: entries.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// `|v⟩⟨v|`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |r, c| v[r] * v[c].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn kron(&self, other: &CMatrix) -> Self {
        let n = other.dim;
        Self::from_fn(self.dim * n, |r, c| self[(r / n, c / n)] * other[(r % n, c % n)])
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `self · rho · self†`.
    pub fn sandwich(&self, rho: &CMatrix) -> Self {
        &(self * rho) * &self.adjoint()
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Eigenvalues come back ascending, eigenvectors as the
    /// matching columns of the returned unitary.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMatrix) {
        let n = self.dim;
        let mut a = self.clone();
        let mut v = CMatrix::identity(n);
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        for _sweep in 0..64 {
            let off: f64 = (0..n)
                .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
                .map(|(r, c)| a[(r, c)].norm_sqr())
                .sum();
            if libm::sqrt(off) <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let beta = a[(p, q)];
                    let mag = beta.norm();
                    if mag <= 1e-300 {
                        continue;
                    }
                    let phase = beta / mag;
                    let alpha = a[(p, p)].re;
                    let gamma = a[(q, q)].re;
                    let theta = 0.5 * libm::atan2(2.0 * mag, gamma - alpha);
                    let (s, c) = (libm::sin(theta), libm::cos(theta));
                    // Columns p and q are replaced by (c, -s·e^{-iφ}) and (s, c·e^{-iφ})
                    // combinations, i.e. the unitary diag(1, e^{-iφ})·R(θ).
                    let e = phase.conj();
                    let gpp = C64::new(c, 0.0);
                    let gpq = C64::new(s, 0.0);
                    let gqp = e * (-s);
                    let gqq = e * c;
                    // a ← a·G
                    for r in 0..n {
                        let ap = a[(r, p)];
                        let aq = a[(r, q)];
                        a[(r, p)] = ap * gpp + aq * gqp;
                        a[(r, q)] = ap * gpq + aq * gqq;
                    }
                    // a ← G†·a
                    for col in 0..n {
                        let ap = a[(p, col)];
                        let aq = a[(q, col)];
                        a[(p, col)] = gpp.conj() * ap + gqp.conj() * aq;
                        a[(q, col)] = gpq.conj() * ap + gqq.conj() * aq;
                    }
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    for r in 0..n {
                        let vp = v[(r, p)];
                        let vq = v[(r, q)];
                        v[(r, p)] = vp * gpp + vq * gqp;
                        v[(r, q)] = vp * gpq + vq * gqq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = CMatrix::from_fn(n, |r, c| v[(r, order[c])]);
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigen().0.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.hermitian_eigen().0.last().copied().unwrap_or(0.0)
    }

    /// Principal square root of a positive semidefinite Hermitian matrix.
    /// Negative round-off eigenvalues are clipped to zero.
    pub fn psd_sqrt(&self) -> CMatrix {
        let (values, vectors) = self.hermitian_eigen();
        let roots: Vec<f64> = values.iter().map(|&x| libm::sqrt(x.max(0.0))).collect();
        let d = CMatrix::diagonal(&roots);
        &(&vectors * &d) * &vectors.adjoint()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.data[k * n + c];
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

fn isqrt(n: usize) -> usize {
    let mut r = 0;
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}

fn check_labels(labels: &[u8], dim: usize) -> Result<()> {
    if qubits_for_dim(dim) != Some(labels.len()) || labels.len() > MAX_QUBITS {
        return Err(Error::DimensionMismatch { dim, qubits: labels.len() });
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::DuplicateLabel(*l));
        }
    }
    Ok(())
}

fn disjoint(a: &[u8], b: &[u8]) -> Result<Vec<u8>> {
    if let Some(dup) = b.iter().find(|l| a.contains(l)) {
        return Err(Error::DuplicateLabel(*dup));
    }
    Ok(a.iter().chain(b).copied().collect())
}

/// Bit position (from the least-significant end) of each target label.
fn bit_positions(targets: &[u8], labels: &[u8]) -> Result<Vec<usize>> {
    let n = labels.len();
    let mut out = Vec::with_capacity(targets.len());
    for (i, t) in targets.iter().enumerate() {
        if targets[..i].contains(t) {
            return Err(Error::DuplicateLabel(*t));
        }
        let pos = labels.iter().position(|l| l == t).ok_or(Error::UnknownLabel(*t))?;
        out.push(n - 1 - pos);
    }
    Ok(out)
}

fn gather(index: usize, bits: &[usize]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | ((index >> b) & 1))
}

/// Lift an operator on `targets` (in that order) to the full register
/// described by `labels`, acting as identity elsewhere.
pub fn embed(op: &CMatrix, targets: &[u8], labels: &[u8]) -> Result<CMatrix> {
    if op.dim() != 1 << targets.len() {
        return Err(Error::DimensionMismatch { dim: op.dim(), qubits: targets.len() });
    }
    let bits = bit_positions(targets, labels)?;
    let mask = bits.iter().fold(0usize, |m, &b| m | (1 << b));
    let dim = 1 << labels.len();
    Ok(CMatrix::from_fn(dim, |r, c| {
        if r & !mask == c & !mask {
            op[(gather(r, &bits), gather(c, &bits))]
        } else {
            ZERO
        }
    }))
}

/// Normalized ket with qubit labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
    labels: Vec<u8>,
}

/// The four maximally entangled two-qubit states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] =
        [BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus];

    pub fn amplitudes(self) -> [C64; 4] {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let (a, b, c, d) = match self {
            BellState::PhiPlus => (h, 0.0, 0.0, h),
            BellState::PhiMinus => (h, 0.0, 0.0, -h),
            BellState::PsiPlus => (0.0, h, h, 0.0),
            BellState::PsiMinus => (0.0, h, -h, 0.0),
        };
        [C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0), C64::new(d, 0.0)]
    }

    pub fn projector(self) -> CMatrix {
        CMatrix::outer(&self.amplitudes())
    }
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, labels: Vec<u8>) -> Result<Self> {
        check_labels(&labels, amplitudes.len())?;
        Ok(PureState { amplitudes, labels })
    }

    pub fn h(label: u8) -> Self {
        PureState { amplitudes: vec![ONE, ZERO], labels: vec![label] }
    }

    pub fn v(label: u8) -> Self {
        PureState { amplitudes: vec![ZERO, ONE], labels: vec![label] }
    }

    pub fn plus(label: u8) -> Self {
        let h = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        PureState { amplitudes: vec![h, h], labels: vec![label] }
    }

    pub fn bell(which: BellState, a: u8, b: u8) -> Result<Self> {
        Self::new(which.amplitudes().to_vec(), vec![a, b])
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amplitudes.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n <= f64::MIN_POSITIVE {
            return Err(Error::ZeroNorm);
        }
        self.amplitudes.iter_mut().for_each(|z| *z /= n);
        Ok(())
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let labels = disjoint(&self.labels, &other.labels)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        PureState::new(amplitudes, labels)
    }

    pub fn to_density(&self) -> DensityState {
        DensityState { matrix: CMatrix::outer(&self.amplitudes), labels: self.labels.clone(), weight: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Unitary,
    Kraus,
    Projector,
    /// Positive operator `0 ≤ E ≤ 𝟙` (a POVM element).
    Effect,
}

/// Operator tagged with the invariant it satisfies.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOp {
    matrix: CMatrix,
    kind: OpKind,
}

const OP_TOL: f64 = 1e-10;

impl LinearOp {
    /// Checked constructor: unitaries must satisfy `U†U = 𝟙`, projectors
    /// `P² = P = P†`, effects `0 ≤ E ≤ 𝟙`.
    pub fn new(matrix: CMatrix, kind: OpKind) -> Result<Self> {
        let dim = matrix.dim();
        if qubits_for_dim(dim).is_none() || dim > 1 << MAX_QUBITS {
            return Err(Error::DimensionMismatch { dim, qubits: 0 });
        }
        let defect = match kind {
            OpKind::Kraus => 0.0,
            OpKind::Unitary => (&matrix.adjoint() * &matrix).max_abs_diff(&CMatrix::identity(dim)),
            OpKind::Projector => {
                let sq = &matrix * &matrix;
                sq.max_abs_diff(&matrix).max(matrix.hermiticity_defect())
            }
            OpKind::Effect => {
                let herm = matrix.hermiticity_defect();
                let (vals, _) = matrix.hermitian_eigen();
                let lo = -vals.first().copied().unwrap_or(0.0);
                let hi = vals.last().copied().unwrap_or(0.0) - 1.0;
                herm.max(lo).max(hi).max(0.0)
            }
        };
        if defect > OP_TOL {
            return Err(Error::InvalidOperator { kind, defect });
        }
        Ok(LinearOp { matrix, kind })
    }

    pub fn projector_onto(state: &[C64]) -> Result<Self> {
        Self::new(CMatrix::outer(state), OpKind::Projector)
    }

    pub fn identity(dim: usize) -> Self {
        LinearOp { matrix: CMatrix::identity(dim), kind: OpKind::Unitary }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn tensor(&self, other: &LinearOp) -> Result<LinearOp> {
        if self.kind != other.kind {
            return Err(Error::KindMismatch(self.kind, other.kind));
        }
        let matrix = self.matrix.kron(&other.matrix);
        if matrix.dim() > 1 << MAX_QUBITS {
            return Err(Error::DimensionMismatch { dim: matrix.dim(), qubits: MAX_QUBITS });
        }
        Ok(LinearOp { matrix, kind: self.kind })
    }
}

/// Density matrix with qubit labels and the accumulated weight of any
/// post-selection that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    matrix: CMatrix,
    labels: Vec<u8>,
    weight: f64,
}

/// Numerical health of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityReport {
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub trace_defect: f64,
}

impl DensityReport {
    pub fn is_valid(&self) -> bool {
        self.hermiticity_defect <= 1e-10 && self.min_eigenvalue >= -1e-9 && self.trace_defect <= 1e-10
    }
}

/// Outcome of a projective (or POVM) measurement branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub probability: f64,
    /// Post-measurement state on all labels, renormalized to trace one.
    pub conditional: DensityState,
}

impl DensityState {
    /// Wraps a matrix without normalizing it; see [`DensityState::validate`].
    pub fn from_matrix(matrix: CMatrix, labels: Vec<u8>) -> Result<Self> {
        check_labels(&labels, matrix.dim())?;
        Ok(DensityState { matrix, labels, weight: 1.0 })
    }

    pub fn maximally_mixed(labels: Vec<u8>) -> Result<Self> {
        let dim = 1usize << labels.len();
        Self::from_matrix(CMatrix::identity(dim).scale_real(1.0 / dim as f64), labels)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Accumulated post-selection weight (1 for unconditioned states).
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn element(&self, r: usize, c: usize) -> C64 {
        self.matrix[(r, c)]
    }

    /// Rescale to unit trace, folding the old trace into `weight`.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr < DEGENERACY_THRESHOLD {
            return Err(Error::ImpossibleBranch(tr));
        }
        Ok(DensityState { matrix: self.matrix.scale_real(1.0 / tr), labels: self.labels.clone(), weight: self.weight * tr })
    }

    pub fn tensor(&self, other: &DensityState) -> Result<DensityState> {
        let labels = disjoint(&self.labels, &other.labels)?;
        Ok(DensityState { matrix: self.matrix.kron(&other.matrix), labels, weight: self.weight * other.weight })
    }

    /// Reduce to the qubits in `keep`; the result keeps this state's label order.
    pub fn partial_trace(&self, keep: &[u8]) -> Result<DensityState> {
        if keep.is_empty() {
            return Err(Error::EmptyKeep);
        }
        // validates labels
        bit_positions(keep, &self.labels)?;
        let kept: Vec<u8> = self.labels.iter().copied().filter(|l| keep.contains(l)).collect();
        let kept_bits = bit_positions(&kept, &self.labels)?;
        let mask = kept_bits.iter().fold(0usize, |m, &b| m | (1 << b));
        let dim = self.matrix.dim();
        let mut out = CMatrix::zeros(1 << kept.len());
        for r in 0..dim {
            for c in 0..dim {
                if r & !mask == c & !mask {
                    out[(gather(r, &kept_bits), gather(c, &kept_bits))] += self.matrix[(r, c)];
                }
            }
        }
        Ok(DensityState { matrix: out, labels: kept, weight: self.weight })
    }

    /// `Re Tr[(op ⊗ 𝟙) ρ]` with `op` acting on `targets`.
    pub fn expectation(&self, op: &CMatrix, targets: &[u8]) -> Result<f64> {
        let full = embed(op, targets, &self.labels)?;
        Ok((&full * &self.matrix).trace().re)
    }

    /// Apply `Σ_k E_k ρ E_k†` on one qubit; the trace is left as is.
    pub fn apply_kraus(&self, kraus: &[LinearOp], target: u8) -> Result<DensityState> {
        let mut acc = CMatrix::zeros(self.matrix.dim());
        for k in kraus {
            let full = embed(k.matrix(), &[target], &self.labels)?;
            acc = &acc + &full.sandwich(&self.matrix);
        }
        Ok(DensityState { matrix: acc, labels: self.labels.clone(), weight: self.weight })
    }

    /// Conjugate by a unitary or Kraus operator acting on `targets`.
    pub fn conjugate(&self, op: &CMatrix, targets: &[u8]) -> Result<DensityState> {
        let full = embed(op, targets, &self.labels)?;
        Ok(DensityState { matrix: full.sandwich(&self.matrix), labels: self.labels.clone(), weight: self.weight })
    }

    /// Lüders measurement branch for a projector or effect on `targets`.
    ///
    /// The probability is `Tr[(E ⊗ 𝟙) ρ]` relative to this state's trace; the
    /// conditional state is `√E ρ √E` renormalized, with `weight` multiplied
    /// by the branch probability.
    pub fn project(&self, op: &LinearOp, targets: &[u8]) -> Result<Projection> {
        let root = match op.kind() {
            OpKind::Projector => op.matrix().clone(),
            OpKind::Effect => op.matrix().psd_sqrt(),
            other => return Err(Error::KindMismatch(other, OpKind::Effect)),
        };
        let tr = self.trace();
        let probability = self.expectation(op.matrix(), targets)? / tr;
        if !(probability >= DEGENERACY_THRESHOLD) {
            return Err(Error::ImpossibleBranch(probability));
        }
        let full = embed(&root, targets, &self.labels)?;
        let post = full.sandwich(&self.matrix);
        let conditional = DensityState {
            matrix: post.scale_real(1.0 / (probability * tr)),
            labels: self.labels.clone(),
            weight: self.weight * probability,
        };
        Ok(Projection { probability, conditional })
    }

    pub fn validate(&self) -> DensityReport {
        DensityReport {
            hermiticity_defect: self.matrix.hermiticity_defect(),
            min_eigenvalue: self.matrix.min_eigenvalue(),
            trace_defect: (self.trace() - 1.0).abs(),
        }
    }

    /// Same state with qubits listed in `order`.
    pub fn reorder(&self, order: &[u8]) -> Result<DensityState> {
        if order.len() != self.labels.len() {
            return Err(Error::DimensionMismatch { dim: self.matrix.dim(), qubits: order.len() });
        }
        let bits = bit_positions(order, &self.labels)?;
        let dim = self.matrix.dim();
        let mut out = CMatrix::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                out[(gather(r, &bits), gather(c, &bits))] = self.matrix[(r, c)];
            }
        }
        Ok(DensityState { matrix: out, labels: order.to_vec(), weight: self.weight })
    }
}

/// Single-qubit polarization projectors.
pub mod polarization {
    use super::*;

    /// Local analyzer settings realizable with wave plates and a polarizer.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
    pub enum Setting {
        H,
        V,
        /// Diagonal, `|+⟩`.
        D,
        /// Anti-diagonal, `|−⟩`.
        A,
    }

    impl Setting {
        pub const ALL: [Setting; 4] = [Setting::H, Setting::V, Setting::D, Setting::A];

        pub fn ket(self) -> [C64; 2] {
            let h = core::f64::consts::FRAC_1_SQRT_2;
            let (a, b) = match self {
                Setting::H => (1.0, 0.0),
                Setting::V => (0.0, 1.0),
                Setting::D => (h, h),
                Setting::A => (h, -h),
            };
            [C64::new(a, 0.0), C64::new(b, 0.0)]
        }

        pub fn projector(self) -> CMatrix {
            CMatrix::outer(&self.ket())
        }

        /// The orthogonal partner in the same basis.
        pub fn flipped(self) -> Setting {
            match self {
                Setting::H => Setting::V,
                Setting::V => Setting::H,
                Setting::D => Setting::A,
                Setting::A => Setting::D,
            }
        }

        pub fn index(self) -> usize {
            self as usize
        }

        pub fn symbol(self) -> char {
            match self {
                Setting::H => 'H',
                Setting::V => 'V',
                Setting::D => 'D',
                Setting::A => 'A',
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn phi_plus_pairs() -> DensityState {
        let a = PureState::bell(BellState::PhiPlus, 1, 2).unwrap();
        let b = PureState::bell(BellState::PhiPlus, 3, 4).unwrap();
        a.tensor(&b).unwrap().to_density()
    }

    #[test]
    fn identity_kron_identity() {
        let i2 = LinearOp::identity(2);
        let i4 = i2.tensor(&i2).unwrap();
        assert_eq!(i4.matrix(), &CMatrix::identity(4));
    }

    #[test]
    fn h_tensor_v_is_index_one() {
        let hv = PureState::h(1).tensor(&PureState::v(2)).unwrap();
        assert_eq!(hv.amplitudes(), &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert_eq!(hv.labels(), &[1, 2]);
    }

    #[test]
    fn two_phi_plus_amplitudes() {
        let a = PureState::bell(BellState::PhiPlus, 1, 2).unwrap();
        let b = PureState::bell(BellState::PhiPlus, 3, 4).unwrap();
        let s = a.tensor(&b).unwrap();
        // |HHHH⟩, |HHVV⟩, |VVHH⟩, |VVVV⟩ enumerated by hand
        let expected = [0b0000, 0b0011, 0b1100, 0b1111];
        for (i, amp) in s.amplitudes().iter().enumerate() {
            let want = if expected.contains(&i) { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(amp.re, want, epsilon = 1e-15);
            assert_abs_diff_eq!(amp.im, 0.0);
        }
    }

    #[test]
    fn tensor_rejects_duplicate_labels_and_kind_mismatch() {
        let err = PureState::h(1).tensor(&PureState::v(1)).unwrap_err();
        assert_eq!(err, Error::DuplicateLabel(1));
        let p = LinearOp::projector_onto(&[c(1.0), c(0.0)]).unwrap();
        let u = LinearOp::identity(2);
        assert!(matches!(p.tensor(&u), Err(Error::KindMismatch(OpKind::Projector, OpKind::Unitary))));
    }

    #[test]
    fn partial_trace_of_bell_is_maximally_mixed() {
        let rho = PureState::bell(BellState::PhiPlus, 1, 2).unwrap().to_density();
        let m = rho.partial_trace(&[1]).unwrap();
        assert!(m.matrix().max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-15);
        assert_eq!(m.labels(), &[1]);
        assert_eq!(rho.partial_trace(&[2, 1]).unwrap(), rho);
    }

    #[test]
    fn marginal_of_two_pairs_on_locally_measured_photons() {
        let m = phi_plus_pairs().partial_trace(&[2, 4]).unwrap();
        assert!(m.matrix().max_abs_diff(&CMatrix::identity(4).scale_real(0.25)) < 1e-15);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = phi_plus_pairs();
        assert_eq!(rho.partial_trace(&[]).unwrap_err(), Error::EmptyKeep);
        assert_eq!(rho.partial_trace(&[7]).unwrap_err(), Error::UnknownLabel(7));
    }

    #[test]
    fn singlet_projection_swaps_entanglement() {
        let rho = phi_plus_pairs();
        let singlet = LinearOp::projector_onto(&BellState::PsiMinus.amplitudes()).unwrap();
        let pr = rho.project(&singlet, &[1, 3]).unwrap();
        assert_abs_diff_eq!(pr.probability, 0.25, epsilon = 1e-14);
        let out = pr.conditional.partial_trace(&[2, 4]).unwrap();
        assert!(out.matrix().max_abs_diff(&BellState::PsiMinus.projector()) < 1e-14);
        assert_abs_diff_eq!(pr.conditional.weight(), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn projection_of_mixed_qubit() {
        let rho = DensityState::maximally_mixed(vec![1]).unwrap();
        let h = LinearOp::projector_onto(&[c(1.0), c(0.0)]).unwrap();
        let pr = rho.project(&h, &[1]).unwrap();
        assert_abs_diff_eq!(pr.probability, 0.5);
        assert!(pr.conditional.matrix().max_abs_diff(&CMatrix::diagonal(&[1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn singlet_projection_of_white_noise() {
        let rho = DensityState::maximally_mixed(vec![1, 2, 3, 4]).unwrap();
        let singlet = LinearOp::projector_onto(&BellState::PsiMinus.amplitudes()).unwrap();
        let pr = rho.project(&singlet, &[1, 3]).unwrap();
        assert_abs_diff_eq!(pr.probability, 0.25, epsilon = 1e-14);
        let out = pr.conditional.partial_trace(&[2, 4]).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::identity(4).scale_real(0.25)) < 1e-14);
    }

    #[test]
    fn impossible_branch_is_flagged() {
        let rho = PureState::h(1).to_density();
        let v = LinearOp::projector_onto(&[c(0.0), c(1.0)]).unwrap();
        assert!(matches!(rho.project(&v, &[1]), Err(Error::ImpossibleBranch(_))));
    }

    #[test]
    fn validate_reports_defects() {
        let rho = PureState::bell(BellState::PhiPlus, 1, 2).unwrap().to_density();
        let r = rho.validate();
        assert!(r.hermiticity_defect < 1e-12 && r.min_eigenvalue > -1e-12 && r.trace_defect < 1e-12);
        let short = DensityState::from_matrix(CMatrix::diagonal(&[0.5, 0.4]), vec![1]).unwrap();
        assert_abs_diff_eq!(short.validate().trace_defect, 0.1, epsilon = 1e-15);
        assert!(!short.validate().is_valid());
    }

    #[test]
    fn operator_invariants_are_checked() {
        let not_unitary = CMatrix::from_real(&[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(LinearOp::new(not_unitary, OpKind::Unitary), Err(Error::InvalidOperator { .. })));
        let too_big = CMatrix::diagonal(&[1.5, 0.0]);
        assert!(matches!(LinearOp::new(too_big, OpKind::Effect), Err(Error::InvalidOperator { .. })));
        let half = CMatrix::diagonal(&[0.5, 0.5]);
        assert!(LinearOp::new(half.clone(), OpKind::Effect).is_ok());
        assert!(LinearOp::new(half, OpKind::Projector).is_err());
    }

    #[test]
    fn eigen_solver_diagonalizes_complex_hermitian() {
        let i = C64::new(0.0, 1.0);
        let m = CMatrix::from_rows(&[c(2.0), i, c(0.0), -i, c(2.0), c(1.0), c(0.0), c(1.0), c(3.0)]);
        let (vals, vecs) = m.hermitian_eigen();
        let d = CMatrix::diagonal(&vals);
        let back = &(&vecs * &d) * &vecs.adjoint();
        assert!(back.max_abs_diff(&m) < 1e-12);
        assert!((&vecs.adjoint() * &vecs).max_abs_diff(&CMatrix::identity(3)) < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn reorder_swaps_qubits() {
        let hv = PureState::h(1).tensor(&PureState::v(2)).unwrap().to_density();
        let vh = hv.reorder(&[2, 1]).unwrap();
        assert_abs_diff_eq!(vh.element(2, 2).re, 1.0);
        assert_eq!(vh.labels(), &[2, 1]);
    }
}
