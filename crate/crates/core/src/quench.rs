//! Exact quench dynamics of small long-range spin chains.
//!
//! Times are in units of `1/J0` with ħ = 1. Chains have open boundaries and
//! `|0>` is spin up (σ^z = +1).

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{self, ComplexMatrix, ComplexVector};
use crate::states;

pub const MAX_CHAIN_QUBITS: usize = 12;

/// Power-law exponent used when none is configured.
pub const DEFAULT_EXPONENT: f64 = 1.24;
/// Field strength in units of `J0` used when none is configured.
pub const DEFAULT_FIELD: f64 = 22.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpinModel {
    /// `Σ J_ij σ^x_i σ^x_j + B Σ σ^z_i`.
    #[default]
    Ising,
    /// `Σ J_ij (σ^x_i σ^x_j + σ^y_i σ^y_j)/2 + B Σ σ^z_i`, the magnetisation-conserving limit.
    Xy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_qubits: usize,
    /// `J0`.
    pub coupling: f64,
    /// Power-law exponent of `J_ij = J0 / |i - j|^exponent`.
    pub exponent: f64,
    pub field: f64,
    #[serde(default)]
    pub model: SpinModel,
}

impl HamiltonianSpec {
    pub fn ion_chain(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            coupling: 1.0,
            exponent: DEFAULT_EXPONENT,
            field: DEFAULT_FIELD,
            model: SpinModel::Ising,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::InvalidArgument("chain needs at least one qubit".into()));
        }
        if self.n_qubits > MAX_CHAIN_QUBITS {
            return Err(Error::TooLarge { qubits: self.n_qubits, limit: MAX_CHAIN_QUBITS });
        }
        if !(self.exponent > 0.0) || !self.coupling.is_finite() || !self.field.is_finite() {
            return Err(Error::InvalidArgument("exponent must be positive and couplings finite".into()));
        }
        Ok(())
    }

    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        let n = self.n_qubits;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                self.coupling / (i.abs_diff(j) as f64).powf(self.exponent)
            }
        })
    }

    /// Dense real Hamiltonian in the computational basis.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        let n = self.n_qubits;
        let d = 1usize << n;
        let j = self.coupling_matrix();
        let bit = |q: usize| 1usize << (n - 1 - q);
        let mut h = DMatrix::zeros(d, d);
        for x in 0..d {
            let up = (0..n).filter(|&q| x & bit(q) == 0).count() as f64;
            h[(x, x)] += self.field * (2.0 * up - n as f64);
            for a in 0..n {
                for b in a + 1..n {
                    let flip = bit(a) | bit(b);
                    let differ = ((x & bit(a)) == 0) != ((x & bit(b)) == 0);
                    match self.model {
                        SpinModel::Ising => h[(x ^ flip, x)] += j[(a, b)],
                        SpinModel::Xy if differ => h[(x ^ flip, x)] += j[(a, b)],
                        SpinModel::Xy => {}
                    }
                }
            }
        }
        Ok(h)
    }
}

/// Eigenvectors of `H` within one invariant subspace.
#[derive(Clone, Debug)]
struct EigenBlock {
    basis: Vec<usize>,
    energies: Vec<f64>,
    modes: DMatrix<f64>,
}

/// Eigendecomposition of a Hamiltonian, reused for every evolution time. Models that
/// conserve the excitation number are diagonalised sector by sector, so evolution
/// never mixes sectors.
#[derive(Clone, Debug)]
pub struct Propagator {
    spec: HamiltonianSpec,
    blocks: Vec<EigenBlock>,
}

impl Propagator {
    pub fn new(spec: &HamiltonianSpec) -> Result<Self> {
        let h = spec.matrix()?;
        let d = h.nrows();
        let sectors: Vec<Vec<usize>> = match spec.model {
            SpinModel::Xy => (0..=spec.n_qubits)
                .map(|k| (0..d).filter(|x| x.count_ones() as usize == k).collect())
                .collect(),
            SpinModel::Ising => vec![(0..d).collect()],
        };
        let blocks = sectors
            .into_iter()
            .map(|basis| {
                let sub = DMatrix::from_fn(basis.len(), basis.len(), |a, b| h[(basis[a], basis[b])]);
                let eig = sub.symmetric_eigen();
                EigenBlock { basis, energies: eig.eigenvalues.iter().copied().collect(), modes: eig.eigenvectors }
            })
            .collect();
        Ok(Self { spec: spec.clone(), blocks })
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    /// All eigenvalues, ascending.
    pub fn energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.blocks.iter().flat_map(|b| b.energies.iter().copied()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// `e^{-iHt} psi`.
    pub fn evolve_vector(&self, psi: &ComplexVector, t: f64) -> ComplexVector {
        let mut out = ComplexVector::zeros(psi.len());
        for b in &self.blocks {
            let local = ComplexVector::from_iterator(b.basis.len(), b.basis.iter().map(|&x| psi[x]));
            let modes = b.modes.map(|x| Complex64::new(x, 0.0));
            let mut c = modes.ad_mul(&local);
            for (ci, e) in c.iter_mut().zip(&b.energies) {
                *ci *= Complex64::from_polar(1.0, -e * t);
            }
            for (&x, v) in b.basis.iter().zip((&modes * c).iter()) {
                out[x] = *v;
            }
        }
        out
    }

    /// Dense `e^{-iHt}`.
    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        let d = 1usize << self.spec.n_qubits;
        let mut u = ComplexMatrix::zeros(d, d);
        for b in &self.blocks {
            let modes = b.modes.map(|x| Complex64::new(x, 0.0));
            let mut scaled = modes.clone();
            for (k, mut col) in scaled.column_iter_mut().enumerate() {
                col *= Complex64::from_polar(1.0, -b.energies[k] * t);
            }
            let local = scaled * modes.adjoint();
            for (a, &x) in b.basis.iter().enumerate() {
                for (c, &y) in b.basis.iter().enumerate() {
                    u[(x, y)] = local[(a, c)];
                }
            }
        }
        u
    }

    /// `e^{-iHt} rho e^{iHt}`.
    pub fn evolve_density(&self, rho: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let u = self.unitary(t);
        &u * rho * u.adjoint()
    }

    /// `<H>` of a state.
    pub fn energy(&self, state: &QuenchState) -> f64 {
        let h = self.spec.matrix().expect("validated at construction").map(|x| Complex64::new(x, 0.0));
        match &state.data {
            StateData::Pure(psi) => psi.dotc(&(&h * psi)).re,
            StateData::Mixed(rho) => linop::trace_product(&h, rho).re,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    Neel,
    /// Product of `p_i |0><0| + (1 - p_i) |1><1|`.
    MixedNeel { up_probabilities: Vec<f64> },
    Custom,
}

/// Up-spin probabilities of an imperfect Néel preparation: ≈1 on qubits that should
/// be up, ≈0 on those that should be down.
pub fn imperfect_neel_probabilities(n_qubits: usize) -> Vec<f64> {
    (0..n_qubits).map(|q| if q % 2 == 0 { 0.995 } else { 0.004 }).collect()
}

#[derive(Clone, Debug, PartialEq)]
enum StateData {
    Pure(ComplexVector),
    Mixed(ComplexMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuenchState {
    n_qubits: usize,
    time: f64,
    initial: InitialState,
    data: StateData,
}

impl QuenchState {
    pub fn neel(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            time: 0.0,
            initial: InitialState::Neel,
            data: StateData::Pure(states::neel(n_qubits)),
        }
    }

    pub fn mixed_neel(up_probabilities: Vec<f64>) -> Result<Self> {
        if up_probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
        }
        let factors: Vec<ComplexMatrix> = up_probabilities
            .iter()
            .map(|&p| {
                let mut m = ComplexMatrix::zeros(2, 2);
                m[(0, 0)] = Complex64::new(p, 0.0);
                m[(1, 1)] = Complex64::new(1.0 - p, 0.0);
                m
            })
            .collect();
        Ok(Self {
            n_qubits: up_probabilities.len(),
            time: 0.0,
            data: StateData::Mixed(states::product(&factors)),
            initial: InitialState::MixedNeel { up_probabilities },
        })
    }

    pub fn from_vector(psi: ComplexVector) -> Result<Self> {
        let n_qubits = linop::qubit_count(psi.len())?;
        Ok(Self { n_qubits, time: 0.0, initial: InitialState::Custom, data: StateData::Pure(psi) })
    }

    pub fn from_density(rho: ComplexMatrix) -> Result<Self> {
        let n_qubits = linop::qubit_count(rho.nrows())?;
        if rho.ncols() != rho.nrows() {
            return Err(Error::DimensionMismatch { expected: rho.nrows(), found: rho.ncols() });
        }
        Ok(Self { n_qubits, time: 0.0, initial: InitialState::Custom, data: StateData::Mixed(rho) })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn density(&self) -> ComplexMatrix {
        match &self.data {
            StateData::Pure(psi) => linop::projector(psi),
            StateData::Mixed(rho) => rho.clone(),
        }
    }

    /// Reduced density matrix on `keep` (ascending qubit indices).
    pub fn reduced(&self, keep: &[usize]) -> Result<ComplexMatrix> {
        match &self.data {
            StateData::Mixed(rho) => linop::partial_trace_qubits(rho, self.n_qubits, keep),
            StateData::Pure(psi) => {
                if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&q| q >= self.n_qubits) {
                    return Err(Error::InvalidArgument(format!("invalid kept qubits {keep:?}")));
                }
                let n = self.n_qubits;
                let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
                let (k, r) = (keep.len(), rest.len());
                let gather = |qubits: &[usize], sub: usize, width: usize| -> usize {
                    qubits.iter().enumerate().fold(0, |acc, (pos, &q)| {
                        if (sub >> (width - 1 - pos)) & 1 == 1 {
                            acc | 1 << (n - 1 - q)
                        } else {
                            acc
                        }
                    })
                };
                let kept_idx: Vec<usize> = (0..1 << k).map(|s| gather(keep, s, k)).collect();
                let rest_idx: Vec<usize> = (0..1 << r).map(|s| gather(&rest, s, r)).collect();
                let amps = ComplexMatrix::from_fn(1 << k, 1 << r, |i, e| psi[kept_idx[i] | rest_idx[e]]);
                Ok(&amps * amps.adjoint())
            }
        }
    }

    /// `<Σ_i σ^z_i>`.
    pub fn magnetization(&self) -> f64 {
        let n = self.n_qubits;
        let weight = |x: usize| n as f64 - 2.0 * x.count_ones() as f64;
        match &self.data {
            StateData::Pure(psi) => psi.iter().enumerate().map(|(x, a)| a.norm_sqr() * weight(x)).sum(),
            StateData::Mixed(rho) => (0..rho.nrows()).map(|x| rho[(x, x)].re * weight(x)).sum(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Pure(psi) => psi.norm_squared(),
            StateData::Mixed(rho) => linop::trace(rho).re,
        }
    }
}

/// Advances `state` by `t` under the cached propagator.
pub fn evolve(prop: &Propagator, state: &QuenchState, t: f64) -> Result<QuenchState> {
    if prop.spec.n_qubits != state.n_qubits {
        return Err(Error::DimensionMismatch { expected: prop.spec.n_qubits, found: state.n_qubits });
    }
    let data = match &state.data {
        StateData::Pure(psi) => StateData::Pure(prop.evolve_vector(psi, t)),
        StateData::Mixed(rho) => StateData::Mixed(prop.evolve_density(rho, t)),
    };
    Ok(QuenchState { data, time: state.time + t, ..state.clone() })
}

/// `(1 - pN) ρ + p Σ_i Tr_i[ρ] ⊗ I_i/2`.
pub fn apply_depolarizing(state: &QuenchState, p: f64) -> Result<QuenchState> {
    let n = state.n_qubits;
    if !(p >= 0.0) || p * n as f64 > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "depolarizing strength {p} invalid for {n} qubits (need 0 ≤ pN ≤ 1)"
        )));
    }
    let rho = state.density();
    if p == 0.0 {
        return Ok(QuenchState { data: StateData::Mixed(rho), ..state.clone() });
    }
    let d = rho.nrows();
    let mut out = &rho * Complex64::new(1.0 - p * n as f64, 0.0);
    for q in 0..n {
        let bit = 1usize << (n - 1 - q);
        for x in 0..d {
            for y in 0..d {
                if (x & bit) != (y & bit) {
                    continue;
                }
                let traced = rho[(x & !bit, y & !bit)] + rho[(x | bit, y | bit)];
                out[(x, y)] += traced * (0.5 * p);
            }
        }
    }
    Ok(QuenchState { data: StateData::Mixed(out), ..state.clone() })
}

fn check_bases(n: usize, bases: &[Matrix2<Complex64>]) -> Result<()> {
    if bases.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: bases.len() });
    }
    for u in bases {
        let defect = linop::unitarity_defect2(u);
        if defect > 1e-10 {
            return Err(Error::NonUnitary(defect));
        }
    }
    Ok(())
}

/// Outcome distribution `<s| U ρ U† |s>` for `U = ⊗_i u_i`, indexed like the basis.
pub fn born_probabilities(state: &QuenchState, bases: &[Matrix2<Complex64>]) -> Result<Vec<f64>> {
    let n = state.n_qubits;
    check_bases(n, bases)?;
    let probs = match &state.data {
        StateData::Pure(psi) => {
            let mut v: Vec<Complex64> = psi.iter().copied().collect();
            for (q, u) in bases.iter().enumerate() {
                linop::apply_single_qubit(&mut v, n, q, u);
            }
            v.iter().map(|a| a.norm_sqr()).collect()
        }
        StateData::Mixed(rho) => rotated_diagonal(rho, n, bases),
    };
    Ok(probs)
}

/// Diagonal of `U ρ U†` for a product unitary and Hermitian `ρ`.
pub(crate) fn rotated_diagonal(rho: &ComplexMatrix, n: usize, bases: &[Matrix2<Complex64>]) -> Vec<f64> {
    let rotate_columns = |m: &mut ComplexMatrix| {
        for mut col in m.column_iter_mut() {
            let mut v: Vec<Complex64> = col.iter().copied().collect();
            for (q, u) in bases.iter().enumerate() {
                linop::apply_single_qubit(&mut v, n, q, u);
            }
            col.copy_from_slice(&v);
        }
    };
    // U (U ρ)† = U ρ U†.
    let mut m = rho.clone();
    rotate_columns(&mut m);
    let mut m = m.adjoint();
    rotate_columns(&mut m);
    m.diagonal().iter().map(|z| z.re).collect()
}

/// Draws an index from a discrete distribution by inversion.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if target < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn index_to_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|q| ((index >> (n - 1 - q)) & 1) as u8).collect()
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// One Born-rule shot after rotating by `⊗ u_i`. Bit `i` belongs to qubit `i`.
pub fn sample_bitstring(state: &QuenchState, bases: &[Matrix2<Complex64>], rng: &mut impl Rng) -> Result<Vec<u8>> {
    let probs = born_probabilities(state, bases)?;
    Ok(index_to_bits(sample_index(&probs, rng), state.n_qubits))
}
