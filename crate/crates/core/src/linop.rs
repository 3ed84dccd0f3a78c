//! Dense complex linear algebra on qubit registers.
//!
//! Basis convention: qubit 0 is the most significant bit of a computational
//! basis index, so for three qubits `|q0 q1 q2>` has index `4*q0 + 2*q1 + q2`.
//! Every routine in the crate relies on this ordering.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Largest register (counting all copies) that is ever materialised densely.
pub const MAX_DENSE_QUBITS: usize = 12;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Named blocks partitioning the qubits of a register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QubitRegister {
    n_qubits: usize,
    blocks: Vec<(String, Vec<usize>)>,
}

impl QubitRegister {
    pub fn new<S: Into<String>>(n_qubits: usize, blocks: Vec<(S, Vec<usize>)>) -> Result<Self> {
        let blocks: Vec<(String, Vec<usize>)> =
            blocks.into_iter().map(|(name, qubits)| (name.into(), qubits)).collect();
        let mut seen = vec![false; n_qubits];
        let mut names = HashSet::new();
        for (name, qubits) in &blocks {
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidRegister(format!("duplicate block `{name}`")));
            }
            for &q in qubits {
                if q >= n_qubits {
                    return Err(Error::InvalidRegister(format!(
                        "qubit {q} in block `{name}` outside 0..{n_qubits}"
                    )));
                }
                if seen[q] {
                    return Err(Error::InvalidRegister(format!("qubit {q} assigned twice")));
                }
                seen[q] = true;
            }
        }
        if let Some(q) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidRegister(format!("qubit {q} belongs to no block")));
        }
        Ok(Self { n_qubits, blocks })
    }

    /// Two blocks `A` = qubits `0..n_a` and `B` = the following `n_b` qubits.
    pub fn bipartite(n_a: usize, n_b: usize) -> Self {
        Self {
            n_qubits: n_a + n_b,
            blocks: vec![
                ("A".to_string(), (0..n_a).collect()),
                ("B".to_string(), (n_a..n_a + n_b).collect()),
            ],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn blocks(&self) -> &[(String, Vec<usize>)] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Result<&[usize]> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, q)| q.as_slice())
            .ok_or_else(|| Error::InvalidRegister(format!("no block named `{name}`")))
    }

    /// Sorted union of the qubits in the named blocks.
    pub fn qubits_of(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for name in names {
            out.extend_from_slice(self.block(name)?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn check_dim(&self, m: &ComplexMatrix) -> Result<()> {
        check_square(m, self.dim())
    }
}

fn check_square(m: &ComplexMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.ncols() });
    }
    Ok(())
}

pub(crate) fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a sequence, left to right. An empty sequence gives the 1×1 identity.
pub fn kron_all<'a, I>(factors: I) -> ComplexMatrix
where
    I: IntoIterator<Item = &'a ComplexMatrix>,
{
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Hilbert-Schmidt inner product Tr(a† b).
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Tr(a b) without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance of `m` from its own adjoint.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    frobenius_norm(&(m - m.adjoint()))
}

/// Frobenius distance of `u† u` from the identity.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    frobenius_norm(&(u.adjoint() * u - identity(u.ncols())))
}

pub(crate) fn unitarity_defect2(u: &Matrix2<Complex64>) -> f64 {
    (u.adjoint() * u - Matrix2::identity())
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Bit masks placing `sub` (an index over `qubits`, first qubit most significant)
/// into a full `n`-qubit index.
fn scatter_table(n: usize, qubits: &[usize]) -> Vec<usize> {
    let k = qubits.len();
    (0..1usize << k)
        .map(|sub| {
            let mut full = 0usize;
            for (pos, &q) in qubits.iter().enumerate() {
                if (sub >> (k - 1 - pos)) & 1 == 1 {
                    full |= 1 << (n - 1 - q);
                }
            }
            full
        })
        .collect()
}

/// Partial trace keeping the named blocks. Kept qubits appear in ascending order.
pub fn partial_trace(m: &ComplexMatrix, reg: &QubitRegister, keep: &[&str]) -> Result<ComplexMatrix> {
    reg.check_dim(m)?;
    let kept = reg.qubits_of(keep)?;
    partial_trace_qubits(m, reg.n_qubits(), &kept)
}

/// Partial trace keeping `keep` (strictly ascending qubit indices).
pub fn partial_trace_qubits(m: &ComplexMatrix, n_qubits: usize, keep: &[usize]) -> Result<ComplexMatrix> {
    check_square(m, 1 << n_qubits)?;
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&q| q >= n_qubits) {
        return Err(Error::InvalidArgument(format!("kept qubits {keep:?} must be ascending and < {n_qubits}")));
    }
    let traced: Vec<usize> = (0..n_qubits).filter(|q| !keep.contains(q)).collect();
    let kept_idx = scatter_table(n_qubits, keep);
    let env_idx = scatter_table(n_qubits, &traced);
    let d = kept_idx.len();
    Ok(ComplexMatrix::from_fn(d, d, |i, j| {
        env_idx
            .iter()
            .map(|&e| m[(kept_idx[i] | e, kept_idx[j] | e)])
            .sum()
    }))
}

/// Reorders qubits so that new qubit `p` is old qubit `order[p]`.
pub fn permute_qubits(m: &ComplexMatrix, n_qubits: usize, order: &[usize]) -> Result<ComplexMatrix> {
    check_square(m, 1 << n_qubits)?;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..n_qubits).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument(format!("{order:?} is not a permutation of 0..{n_qubits}")));
    }
    let map = scatter_table(n_qubits, order);
    let d = 1 << n_qubits;
    Ok(ComplexMatrix::from_fn(d, d, |i, j| m[(map[i], map[j])]))
}

/// Row-major vectorisation: entry (i, j) lands at `i * cols + j`.
pub fn vectorize(m: &ComplexMatrix) -> ComplexVector {
    let (rows, cols) = m.shape();
    ComplexVector::from_fn(rows * cols, |k, _| m[(k / cols, k % cols)])
}

pub fn devectorize(v: &ComplexVector, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, found: v.len() });
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

/// Realignment `R[(a a'), (b b')] = m[(a b), (a' b')]` for a matrix on `A ⊗ B`.
///
/// The singular values of the result are the operator Schmidt coefficients of `m`.
/// `R R†` is the partial trace over `B ⊗ B̃` of the vectorised projector, acting on `A ⊗ Ã`.
pub fn realign(m: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
    check_square(m, dim_a * dim_b)?;
    let mut r = ComplexMatrix::zeros(dim_a * dim_a, dim_b * dim_b);
    for a in 0..dim_a {
        for b in 0..dim_b {
            let row = a * dim_b + b;
            for ap in 0..dim_a {
                for bp in 0..dim_b {
                    r[(a * dim_a + ap, b * dim_b + bp)] = m[(row, ap * dim_b + bp)];
                }
            }
        }
    }
    Ok(r)
}

/// Inverse of [`realign`].
pub fn unrealign(r: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
    if r.shape() != (dim_a * dim_a, dim_b * dim_b) {
        return Err(Error::DimensionMismatch { expected: dim_a * dim_a, found: r.nrows() });
    }
    let d = dim_a * dim_b;
    Ok(ComplexMatrix::from_fn(d, d, |row, col| {
        let (a, b) = (row / dim_b, row % dim_b);
        let (ap, bp) = (col / dim_b, col % dim_b);
        r[(a * dim_a + ap, b * dim_b + bp)]
    }))
}

/// One block exchanged between two copies (0-based copy indices).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapPair {
    pub block: String,
    pub first: usize,
    pub second: usize,
}

impl SwapPair {
    pub fn new(block: impl Into<String>, first: usize, second: usize) -> Self {
        Self { block: block.into(), first, second }
    }
}

/// The fourth-moment contraction `S^A_{0,3} S^A_{1,2} S^B_{0,1} S^B_{2,3}`.
pub fn fourth_moment_pairs() -> Vec<SwapPair> {
    vec![
        SwapPair::new("A", 0, 3),
        SwapPair::new("A", 1, 2),
        SwapPair::new("B", 0, 1),
        SwapPair::new("B", 2, 3),
    ]
}

/// Bit permutation on `copies` stacked registers (copy-major, copy 0 most significant).
struct CopyPermutation {
    total_qubits: usize,
    /// (bit position in copy c1, bit position in copy c2) exchanged pairwise.
    exchanges: Vec<(usize, usize)>,
}

impl CopyPermutation {
    fn new(reg: &QubitRegister, copies: usize, pairs: &[SwapPair]) -> Result<Self> {
        let n = reg.n_qubits();
        let total = n * copies;
        let mut used = HashSet::new();
        let mut exchanges = Vec::new();
        for p in pairs {
            for idx in [p.first, p.second] {
                if idx >= copies {
                    return Err(Error::InvalidCopyIndex { index: idx, copies });
                }
            }
            if p.first == p.second {
                return Err(Error::InvalidArgument(format!("block `{}` swapped with itself", p.block)));
            }
            for c in [p.first, p.second] {
                if !used.insert((p.block.clone(), c)) {
                    return Err(Error::InvalidArgument(format!(
                        "block `{}` of copy {c} appears in more than one swap",
                        p.block
                    )));
                }
            }
            for &q in reg.block(&p.block)? {
                let bit = |c: usize| total - 1 - (c * n + q);
                exchanges.push((bit(p.first), bit(p.second)));
            }
        }
        Ok(Self { total_qubits: total, exchanges })
    }

    fn apply(&self, x: usize) -> usize {
        let mut y = x;
        for &(p, q) in &self.exchanges {
            let bp = (x >> p) & 1;
            let bq = (x >> q) & 1;
            if bp != bq {
                y ^= (1 << p) | (1 << q);
            }
        }
        y
    }
}

/// Dense permutation operator exchanging blocks between copies of `reg`.
pub fn swap_operator(reg: &QubitRegister, copies: usize, pairs: &[SwapPair]) -> Result<ComplexMatrix> {
    let perm = CopyPermutation::new(reg, copies, pairs)?;
    if perm.total_qubits > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge { qubits: perm.total_qubits, limit: MAX_DENSE_QUBITS });
    }
    let d = 1usize << perm.total_qubits;
    let mut s = ComplexMatrix::zeros(d, d);
    for x in 0..d {
        s[(perm.apply(x), x)] = ONE;
    }
    Ok(s)
}

/// `Tr[S (m_0 ⊗ m_1 ⊗ ...)]` for the swap permutation `S`, contracted index by index
/// without materialising either operator.
pub fn swap_trace(reg: &QubitRegister, pairs: &[SwapPair], states: &[&ComplexMatrix]) -> Result<Complex64> {
    let copies = states.len();
    for s in states {
        reg.check_dim(s)?;
    }
    let perm = CopyPermutation::new(reg, copies, pairs)?;
    let n = reg.n_qubits();
    let mask = (1usize << n) - 1;
    let mut acc = ZERO;
    // Disjoint transpositions: the permutation is its own inverse.
    for x in 0..1usize << perm.total_qubits {
        let y = perm.apply(x);
        let mut term = ONE;
        for (c, m) in states.iter().enumerate() {
            let shift = (copies - 1 - c) * n;
            term *= m[((y >> shift) & mask, (x >> shift) & mask)];
            if term == ZERO {
                break;
            }
        }
        acc += term;
    }
    Ok(acc)
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Applies a 2×2 matrix to qubit `qubit` of a state vector in place.
pub fn apply_single_qubit(psi: &mut [Complex64], n_qubits: usize, qubit: usize, u: &Matrix2<Complex64>) {
    let stride = 1usize << (n_qubits - 1 - qubit);
    for base in 0..psi.len() {
        if base & stride != 0 {
            continue;
        }
        let (a0, a1) = (psi[base], psi[base | stride]);
        psi[base] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
        psi[base | stride] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
    }
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    let i = Complex64::i();
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Projector onto a computational basis state given as a bit string (qubit 0 first).
pub fn basis_projector(bits: &[u8]) -> ComplexMatrix {
    let n = bits.len();
    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    let mut m = ComplexMatrix::zeros(1 << n, 1 << n);
    m[(idx, idx)] = ONE;
    m
}

/// `|psi><psi|`.
pub fn projector(psi: &ComplexVector) -> ComplexMatrix {
    psi * psi.adjoint()
}
