//! Classical shadows, batch shadows and multi-copy estimators.
//!
//! Every estimator is a mean over ordered tuples of distinct batches. With one
//! batch per unitary this is the U-statistic; with fewer batches it is the
//! cheaper batch estimator. Both are unbiased.
//!
//! Shadows are restricted to the measured subsystem and ordered `A` then `B`.
//! Dense matrices cap this at about 15 qubits.

use std::borrow::{Borrow, Cow};
use std::collections::BTreeMap;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linop::{self, ComplexMatrix, QubitRegister, SwapPair, ONE, ZERO};
use crate::oe_exact::{self, ChargeOperator};
use crate::quench::{self, QuenchState};
use crate::{rng, states};

/// Above this many batches the four-copy mean switches from tuple enumeration
/// to the power-sum expansion.
pub const ENUMERATION_LIMIT: usize = 32;

/// Sectors whose estimated weight falls below this are flagged empty.
pub const SECTOR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::X, PauliBasis::Y, PauliBasis::Z];

    /// Rotation applied before a computational-basis readout.
    pub fn unitary(self) -> Matrix2<Complex64> {
        let h = Complex64::new(0.5f64.sqrt(), 0.0);
        let i = Complex64::i();
        match self {
            PauliBasis::X => Matrix2::new(h, h, h, -h),
            PauliBasis::Y => Matrix2::new(h, -i * h, h, i * h),
            PauliBasis::Z => Matrix2::identity(),
        }
    }

    pub fn label(self) -> char {
        match self {
            PauliBasis::X => 'X',
            PauliBasis::Y => 'Y',
            PauliBasis::Z => 'Z',
        }
    }

    pub fn from_label(c: char) -> Option<Self> {
        match c {
            'X' | 'x' => Some(PauliBasis::X),
            'Y' | 'y' => Some(PauliBasis::Y),
            'Z' | 'z' => Some(PauliBasis::Z),
            _ => None,
        }
    }
}

/// Single-qubit rotation ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    #[default]
    Pauli,
    Haar,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    Pauli(Vec<PauliBasis>),
    Unitary(Vec<Matrix2<Complex64>>),
}

impl Basis {
    pub fn len(&self) -> usize {
        match self {
            Basis::Pauli(b) => b.len(),
            Basis::Unitary(u) => u.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ensemble(&self) -> Ensemble {
        match self {
            Basis::Pauli(_) => Ensemble::Pauli,
            Basis::Unitary(_) => Ensemble::Haar,
        }
    }

    pub fn unitary(&self, qubit: usize) -> Matrix2<Complex64> {
        match self {
            Basis::Pauli(b) => b[qubit].unitary(),
            Basis::Unitary(u) => u[qubit],
        }
    }

    pub fn unitaries(&self) -> Vec<Matrix2<Complex64>> {
        (0..self.len()).map(|q| self.unitary(q)).collect()
    }

    pub fn sample(ensemble: Ensemble, n_qubits: usize, rng: &mut impl Rng) -> Self {
        match ensemble {
            Ensemble::Pauli => Basis::Pauli((0..n_qubits).map(|_| PauliBasis::ALL[rng.gen_range(0..3)]).collect()),
            Ensemble::Haar => Basis::Unitary((0..n_qubits).map(|_| haar_single_qubit(rng)).collect()),
        }
    }
}

/// Haar-random 2×2 unitary.
pub fn haar_single_qubit(rng: &mut impl Rng) -> Matrix2<Complex64> {
    let u = states::haar_unitary(2, rng);
    Matrix2::new(u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)])
}

/// One bitstring `bits` read out after rotating by `basis`. `r` and `m` are the
/// 1-based unitary and shot indices.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub r: usize,
    pub m: usize,
    pub basis: Basis,
    pub bits: Vec<u8>,
}

impl MeasurementRecord {
    pub fn validate(&self) -> Result<()> {
        if self.bits.len() != self.basis.len() {
            return Err(Error::MalformedRecord(format!(
                "record r={} m={}: {} bits for {} bases",
                self.r,
                self.m,
                self.bits.len(),
                self.basis.len()
            )));
        }
        if self.bits.iter().any(|&b| b > 1) {
            return Err(Error::MalformedRecord(format!("record r={} m={}: bits must be 0 or 1", self.r, self.m)));
        }
        if let Basis::Unitary(us) = &self.basis {
            for u in us {
                let defect = linop::unitarity_defect2(u);
                if defect > 1e-10 {
                    return Err(Error::NonUnitary(defect));
                }
            }
        }
        Ok(())
    }
}

/// `3 u†|s><s|u - I`.
pub fn shadow_factor(u: &Matrix2<Complex64>, s: u8) -> ComplexMatrix {
    let s = s as usize;
    ComplexMatrix::from_fn(2, 2, |i, j| {
        let delta = if i == j { ONE } else { ZERO };
        u[(s, i)].conj() * u[(s, j)] * 3.0 - delta
    })
}

/// Single-shot shadow on all qubits of the record.
pub fn build_shadow(rec: &MeasurementRecord) -> Result<ComplexMatrix> {
    rec.validate()?;
    let factors: Vec<ComplexMatrix> = (0..rec.bits.len()).map(|q| shadow_factor(&rec.basis.unitary(q), rec.bits[q])).collect();
    Ok(linop::kron_all(factors.iter()))
}

/// Shot-averaged shadow of each unitary, restricted to `qubits` (kron order as given).
/// Returned in increasing `r`.
pub fn unitary_shadows(records: &[MeasurementRecord], qubits: &[usize], exec: Execution) -> Result<Vec<ComplexMatrix>> {
    let mut groups: BTreeMap<usize, Vec<&MeasurementRecord>> = BTreeMap::new();
    for rec in records {
        rec.validate()?;
        if let Some(&q) = qubits.iter().find(|&&q| q >= rec.bits.len()) {
            return Err(Error::MalformedRecord(format!("qubit {q} outside record of {} bits", rec.bits.len())));
        }
        groups.entry(rec.r).or_default().push(rec);
    }
    let groups: Vec<Vec<&MeasurementRecord>> = groups.into_values().collect();
    exec.map(groups.len(), |g| per_unitary_shadow(&groups[g], qubits)).into_iter().collect()
}

fn per_unitary_shadow(group: &[&MeasurementRecord], qubits: &[usize]) -> Result<ComplexMatrix> {
    let first = group[0];
    let ensemble = first.basis.ensemble();
    let mut factors = Vec::with_capacity(qubits.len());
    for &q in qubits {
        let u = first.basis.unitary(q);
        factors.push([shadow_factor(&u, 0), shadow_factor(&u, 1)]);
    }
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for rec in group {
        if rec.basis.ensemble() != ensemble || qubits.iter().any(|&q| rec.basis.unitary(q) != first.basis.unitary(q)) {
            return Err(Error::MalformedRecord(format!("unitary r={} has inconsistent bases", rec.r)));
        }
        let key = qubits.iter().fold(0usize, |acc, &q| (acc << 1) | rec.bits[q] as usize);
        *hist.entry(key).or_default() += 1;
    }
    let k = qubits.len();
    let d = 1usize << k;
    let mut out = ComplexMatrix::zeros(d, d);
    let total = group.len() as f64;
    for (key, count) in hist {
        let shot = linop::kron_all((0..k).map(|p| &factors[p][(key >> (k - 1 - p)) & 1]));
        out += shot * Complex64::new(count as f64 / total, 0.0);
    }
    Ok(out)
}

/// Simulates `n_u` random unitaries with `n_m` shots each. Unitary `r` draws from
/// its own stream, so records do not depend on thread scheduling.
pub fn randomized_measurements(
    state: &QuenchState,
    ensemble: Ensemble,
    n_u: usize,
    n_m: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<MeasurementRecord>> {
    let n = state.n_qubits();
    let per_unitary = exec.map(n_u, |r| -> Result<Vec<MeasurementRecord>> {
        let mut rng = rng::record_stream(seed, r as u64);
        let basis = Basis::sample(ensemble, n, &mut rng);
        let probs = quench::born_probabilities(state, &basis.unitaries())?;
        Ok((0..n_m)
            .map(|m| MeasurementRecord {
                r: r + 1,
                m: m + 1,
                basis: basis.clone(),
                bits: quench::index_to_bits(quench::sample_index(&probs, &mut rng), n),
            })
            .collect())
    });
    let mut out = Vec::with_capacity(n_u * n_m);
    for chunk in per_unitary {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Average of a contiguous group of per-unitary shadows.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowBatch {
    pub index: usize,
    pub matrix: ComplexMatrix,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchOrder {
    #[default]
    Contiguous,
    /// Unitaries are permuted with this seed before contiguous grouping.
    Shuffled { seed: u64 },
}

/// Qubit counts of the two blocks, in shadow order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub n_a: usize,
    pub n_b: usize,
}

impl Split {
    pub fn new(n_a: usize, n_b: usize) -> Self {
        Self { n_a, n_b }
    }

    pub fn dim_a(&self) -> usize {
        1 << self.n_a
    }

    pub fn dim_b(&self) -> usize {
        1 << self.n_b
    }

    pub fn register(&self) -> QubitRegister {
        QubitRegister::bipartite(self.n_a, self.n_b)
    }
}

fn mean_of<M: Borrow<ComplexMatrix>>(items: &[M]) -> ComplexMatrix {
    let mut acc = items[0].borrow().clone();
    for m in &items[1..] {
        acc += m.borrow();
    }
    acc / Complex64::new(items.len() as f64, 0.0)
}

/// `n_prime` contiguous groups whose sizes differ by at most one.
fn balanced_groups<M: Borrow<ComplexMatrix>>(items: &[M], n_prime: usize) -> Vec<ComplexMatrix> {
    let (base, extra) = (items.len() / n_prime, items.len() % n_prime);
    let mut start = 0;
    (0..n_prime)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let g = mean_of(&items[start..start + len]);
            start += len;
            g
        })
        .collect()
}

/// Groups per-unitary shadows into `n_prime` equal batches. Trailing unitaries that
/// do not fill a batch are dropped with a warning.
pub fn batch_shadows(unitary: &[ComplexMatrix], n_prime: usize, order: BatchOrder) -> Result<Vec<ShadowBatch>> {
    let ordered = ordered_unitaries(unitary, order);
    group_equal(&ordered, n_prime)
}

fn ordered_unitaries(unitary: &[ComplexMatrix], order: BatchOrder) -> Vec<&ComplexMatrix> {
    let mut ordered: Vec<&ComplexMatrix> = unitary.iter().collect();
    if let BatchOrder::Shuffled { seed } = order {
        ordered.shuffle(&mut rng::stream(seed, &[u64::MAX]));
    }
    ordered
}

fn group_equal(ordered: &[&ComplexMatrix], n_prime: usize) -> Result<Vec<ShadowBatch>> {
    if n_prime == 0 || n_prime > ordered.len() {
        return Err(Error::TooFewBatches { needed: n_prime.max(1), available: ordered.len() });
    }
    let size = ordered.len() / n_prime;
    let used = size * n_prime;
    if used < ordered.len() {
        log::warn!("dropping {} trailing unitaries so {} batches are equal", ordered.len() - used, n_prime);
    }
    Ok(ordered[..used]
        .chunks(size)
        .enumerate()
        .map(|(index, chunk)| ShadowBatch { index, matrix: mean_of(chunk), count: size })
        .collect())
}

/// Groups the records' per-unitary shadows on `qubits` into `n_prime` batches.
pub fn make_batches(records: &[MeasurementRecord], qubits: &[usize], n_prime: usize, order: BatchOrder) -> Result<Vec<ShadowBatch>> {
    batch_shadows(&unitary_shadows(records, qubits, Execution::default())?, n_prime, order)
}

/// Batch shadows together with the per-unitary shadows they came from, so
/// jackknife resamples can regroup.
#[derive(Clone, Debug)]
pub struct BatchedShadows {
    split: Split,
    unitary: Vec<ComplexMatrix>,
    batches: Vec<ShadowBatch>,
    realigned: Vec<ComplexMatrix>,
    n_unitaries: usize,
    exec: Execution,
    jackknife: bool,
}

impl BatchedShadows {
    pub fn new(unitary: Vec<ComplexMatrix>, split: Split, n_prime: usize, order: BatchOrder) -> Result<Self> {
        let d = split.dim_a() * split.dim_b();
        if let Some(m) = unitary.iter().find(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
        }
        let n_unitaries = unitary.len();
        let ordered: Vec<ComplexMatrix> = ordered_unitaries(&unitary, order).into_iter().cloned().collect();
        let refs: Vec<&ComplexMatrix> = ordered.iter().collect();
        let batches = group_equal(&refs, n_prime)?;
        let used = batches.len() * batches[0].count;
        let mut unitary = ordered;
        unitary.truncate(used);
        let realigned = batches
            .iter()
            .map(|b| linop::realign(&b.matrix, split.dim_a(), split.dim_b()))
            .collect::<Result<_>>()?;
        Ok(Self { split, unitary, batches, realigned, n_unitaries, exec: Execution::default(), jackknife: true })
    }

    /// Builds batches straight from records. `a` and `b` list the measured qubits of
    /// each block.
    pub fn from_records(
        records: &[MeasurementRecord],
        a: &[usize],
        b: &[usize],
        n_prime: usize,
        order: BatchOrder,
    ) -> Result<Self> {
        let qubits: Vec<usize> = a.iter().chain(b).copied().collect();
        Self::new(unitary_shadows(records, &qubits, Execution::default())?, Split::new(a.len(), b.len()), n_prime, order)
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Disables jackknife error bars, which cost one extra estimate per resample.
    pub fn without_jackknife(mut self) -> Self {
        self.jackknife = false;
        self
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn batches(&self) -> &[ShadowBatch] {
        &self.batches
    }

    pub fn n_prime(&self) -> usize {
        self.batches.len()
    }

    /// Unitaries in the dataset, including any dropped by truncation.
    pub fn n_unitaries(&self) -> usize {
        self.n_unitaries
    }

    /// Dense batch matrices of one jackknife resample. Leaves out one batch when
    /// there are spare batches, otherwise one unitary with the rest regrouped.
    fn resample_dense(&self, copies: usize, k: usize) -> Vec<Cow<'_, ComplexMatrix>> {
        if self.n_prime() > copies {
            self.batches.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, b)| Cow::Borrowed(&b.matrix)).collect()
        } else {
            let rest: Vec<&ComplexMatrix> = self.unitary.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, m)| m).collect();
            balanced_groups(&rest, self.n_prime()).into_iter().map(Cow::Owned).collect()
        }
    }

    fn resample_realigned(&self, copies: usize, k: usize) -> Vec<Cow<'_, ComplexMatrix>> {
        if self.n_prime() > copies {
            self.realigned.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, r)| Cow::Borrowed(r)).collect()
        } else {
            self.resample_dense(copies, k)
                .iter()
                .map(|m| Cow::Owned(linop::realign(m, self.split.dim_a(), self.split.dim_b()).expect("dimensions checked")))
                .collect()
        }
    }

    fn resample_count(&self, copies: usize) -> usize {
        if self.n_prime() > copies {
            self.n_prime()
        } else if self.unitary.len() > self.n_prime() {
            self.unitary.len()
        } else {
            0
        }
    }

    /// Jackknife standard error of `f` evaluated on realigned batches. `None` when
    /// disabled, when fewer than two resamples exist or when any resample is invalid.
    fn jackknife_realigned<F>(&self, copies: usize, f: F) -> Option<f64>
    where
        F: Fn(&[Cow<'_, ComplexMatrix>]) -> Option<f64> + Sync + Send,
    {
        if !self.jackknife {
            return None;
        }
        let k = self.resample_count(copies);
        if k < 2 {
            return None;
        }
        let thetas: Option<Vec<f64>> = Execution::Sequential
            .map(k, |i| f(&self.resample_realigned(copies, i)))
            .into_iter()
            .collect();
        jackknife_error(&thetas?)
    }
}

/// `sqrt((K-1)/K Σ (θ_i - θ̄)²)` over leave-one-out estimates.
pub fn jackknife_error(thetas: &[f64]) -> Option<f64> {
    let k = thetas.len();
    if k < 2 || thetas.iter().any(|t| !t.is_finite()) {
        return None;
    }
    let mean = thetas.iter().sum::<f64>() / k as f64;
    let ss: f64 = thetas.iter().map(|t| (t - mean).powi(2)).sum();
    Some(((k as f64 - 1.0) / k as f64 * ss).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// A moment inside a logarithm was estimated nonpositive.
    NonPositiveMoment,
    /// The sector weight is below [`SECTOR_FLOOR`].
    EmptySector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// NaN when `flag` is set.
    pub value: f64,
    pub flag: Option<Flag>,
    /// Copies per term.
    pub n_used: usize,
    pub n_batches: usize,
    pub jackknife_error: Option<f64>,
    /// Moments that enter `value`.
    pub raw: BTreeMap<String, f64>,
    pub metadata: BTreeMap<String, String>,
}

impl EstimateReport {
    fn new(value: Option<f64>, flag: Flag, n_used: usize, n_batches: usize) -> Self {
        Self {
            value: value.unwrap_or(f64::NAN),
            flag: if value.is_some() { None } else { Some(flag) },
            n_used,
            n_batches,
            jackknife_error: None,
            raw: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.flag.is_none()
    }

    fn with_raw(mut self, key: &str, value: f64) -> Self {
        self.raw.insert(key.to_string(), value);
        self
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }
}

fn tr_mul(a: &ComplexMatrix, b_transposed: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b_transposed.iter()).map(|(x, y)| x * y).sum()
}

/// Mean of `Tr(R_a R_b†)` over ordered distinct pairs.
pub fn pair_mean<M: Borrow<ComplexMatrix>>(rs: &[M]) -> f64 {
    let n = rs.len();
    let sum = mean_of(rs) * Complex64::new(n as f64, 0.0);
    let diag: f64 = rs.iter().map(|r| r.borrow().norm_squared()).sum();
    (sum.norm_squared() - diag) / (n * (n - 1)) as f64
}

/// Mean of `Re Tr(R_a R_b† R_c R_d†)` over ordered distinct quadruples.
pub fn quad_mean<M: Borrow<ComplexMatrix> + Sync>(rs: &[M], exec: Execution) -> f64 {
    if rs.len() <= ENUMERATION_LIMIT {
        quad_mean_enumerated(rs, exec)
    } else {
        quad_mean_power_sums(rs, exec)
    }
}

/// Enumerates quadruples with the pair products `R_a R_b†` precomputed.
pub fn quad_mean_enumerated<M: Borrow<ComplexMatrix> + Sync>(rs: &[M], exec: Execution) -> f64 {
    let n = rs.len();
    let pairs: Vec<Vec<Option<(ComplexMatrix, ComplexMatrix)>>> = exec.map(n, |a| {
        (0..n)
            .map(|b| {
                (a != b).then(|| {
                    let p = rs[a].borrow() * rs[b].borrow().adjoint();
                    let pt = p.transpose();
                    (p, pt)
                })
            })
            .collect()
    });
    let partial = exec.map(n, |a| {
        let mut acc = ZERO;
        for b in (0..n).filter(|&b| b != a) {
            let (p_ab, _) = pairs[a][b].as_ref().expect("distinct");
            for c in (0..n).filter(|&c| c != a && c != b) {
                for d in (0..n).filter(|&d| d != a && d != b && d != c) {
                    acc += tr_mul(p_ab, &pairs[c][d].as_ref().expect("distinct").1);
                }
            }
        }
        acc.re
    });
    let total = partial.into_iter().fold(0.0, |acc, x| acc + x);
    total / (n * (n - 1) * (n - 2) * (n - 3)) as f64
}

/// Same mean in `O(n)` matrix products: unrestricted power sums corrected by the
/// Möbius inversion over set partitions of the four positions.
pub fn quad_mean_power_sums<M: Borrow<ComplexMatrix> + Sync>(rs: &[M], exec: Execution) -> f64 {
    let n = rs.len();
    let (k, m) = (rs[0].borrow().nrows(), rs[0].borrow().ncols());
    let s = mean_of(rs) * Complex64::new(n as f64, 0.0);
    let sd = s.adjoint();
    let per_item = exec.map(n, |i| {
        let r = rs[i].borrow();
        let rd = r.adjoint();
        let rrd = r * &rd;
        let rdr = &rd * r;
        // {13}, {24}, the four triples and {1234}, per item.
        let t13 = (r * &sd * r * &sd).trace();
        let t24 = (&s * &rd * &s * &rd).trace();
        let t123 = (&rrd * r * &sd).trace();
        let t124 = (&rrd * &s * &rd).trace();
        let t134 = (r * &sd * &rrd).trace();
        let t234 = (&s * &rdr * &rd).trace();
        let t1234 = (&rrd * &rrd).trace();
        (rrd, rdr, [t13, t24, t123 + t124 + t134 + t234, t1234])
    });
    let mut p = ComplexMatrix::zeros(k, k);
    let mut q = ComplexMatrix::zeros(m, m);
    let mut sums = [ZERO; 4];
    for (rrd, rdr, t) in &per_item {
        p += rrd;
        q += rdr;
        for (acc, x) in sums.iter_mut().zip(t) {
            *acc += x;
        }
    }
    let [t13, t24, triples, t1234] = sums;
    let ssd = &s * &sd;
    let none = (&ssd * &ssd).trace();
    let pairs = (&p * &ssd).trace() + t13 + (&q * &sd * &s).trace() + (&s * &q * &sd).trace() + t24 + (&ssd * &p).trace();
    let double = (&p * &p).trace() + (&q * &q).trace() + cross_pair_term(rs, k, m);
    let total = none - pairs + double + triples * 2.0 - t1234 * 6.0;
    total.re / (n * (n - 1) * (n - 2) * (n - 3)) as f64
}

/// `Σ_{i,j} Tr(R_i R_j† R_i R_j†)` via `T = Σ_i vec(R_i) vec(R_i)^T`.
fn cross_pair_term<M: Borrow<ComplexMatrix>>(rs: &[M], k: usize, m: usize) -> Complex64 {
    let km = k * m;
    let mut v = ComplexMatrix::zeros(km, rs.len());
    for (i, r) in rs.iter().enumerate() {
        let r = r.borrow();
        for x in 0..k {
            for y in 0..m {
                v[(x * m + y, i)] = r[(x, y)];
            }
        }
    }
    let t = &v * v.transpose();
    // Σ T[(x,y),(z,w)] conj(T[(x,w),(z,y)]).
    let mut acc = ZERO;
    for x in 0..k {
        for z in 0..k {
            for y in 0..m {
                for w in 0..m {
                    acc += t[(x * m + y, z * m + w)] * t[(x * m + w, z * m + y)].conj();
                }
            }
        }
    }
    acc
}

fn require_batches(set: &BatchedShadows, needed: usize) -> Result<()> {
    if set.n_prime() < needed {
        return Err(Error::TooFewBatches { needed, available: set.n_prime() });
    }
    Ok(())
}

fn positive_log(x: f64) -> Option<f64> {
    (x > 0.0 && x.is_finite()).then(|| x.ln())
}

/// Observable acting on `n` copies of the shadow register.
#[derive(Clone, Debug)]
pub enum MultiCopyObservable {
    Dense(ComplexMatrix),
    /// Product of block swaps between copies, contracted without forming the operator.
    Permutation { register: QubitRegister, pairs: Vec<SwapPair> },
}

impl MultiCopyObservable {
    fn evaluate(&self, states: &[&ComplexMatrix]) -> Result<Complex64> {
        match self {
            MultiCopyObservable::Dense(o) => {
                let rho = linop::kron_all(states.iter().copied());
                if rho.nrows() != o.nrows() {
                    return Err(Error::DimensionMismatch { expected: o.nrows(), found: rho.nrows() });
                }
                Ok(linop::trace_product(o, &rho))
            }
            MultiCopyObservable::Permutation { register, pairs } => linop::swap_trace(register, pairs, states),
        }
    }
}

fn for_each_distinct_tuple(n: usize, len: usize, first: usize, f: &mut impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let mut tuple = vec![first];
    fn rec(n: usize, len: usize, tuple: &mut Vec<usize>, f: &mut impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
        if tuple.len() == len {
            return f(tuple);
        }
        for next in 0..n {
            if !tuple.contains(&next) {
                tuple.push(next);
                rec(n, len, tuple, f)?;
                tuple.pop();
            }
        }
        Ok(())
    }
    rec(n, len, &mut tuple, f)
}

fn multicopy_mean<M: Borrow<ComplexMatrix> + Sync>(batches: &[M], observable: &MultiCopyObservable, copies: usize, exec: Execution) -> Result<f64> {
    let n = batches.len();
    let partial = exec.map(n, |first| -> Result<Complex64> {
        let mut acc = ZERO;
        for_each_distinct_tuple(n, copies, first, &mut |t| {
            let states: Vec<&ComplexMatrix> = t.iter().map(|&i| batches[i].borrow()).collect();
            acc += observable.evaluate(&states)?;
            Ok(())
        })?;
        Ok(acc)
    });
    let mut total = ZERO;
    for p in partial {
        total += p?;
    }
    let tuples: usize = (0..copies).map(|i| n - i).product();
    Ok(total.re / tuples as f64)
}

/// Mean of `Re Tr[O ⊗_i ρ_{b_i}]` over ordered distinct `copies`-tuples of batches.
pub fn estimate_multicopy(set: &BatchedShadows, observable: &MultiCopyObservable, copies: usize) -> Result<EstimateReport> {
    require_batches(set, copies.max(1))?;
    let dense: Vec<&ComplexMatrix> = set.batches.iter().map(|b| &b.matrix).collect();
    let value = multicopy_mean(&dense, observable, copies, set.exec)?;
    let mut report = EstimateReport::new(Some(value), Flag::NonPositiveMoment, copies, set.n_prime());
    if set.jackknife {
        let k = set.resample_count(copies);
        let thetas: Result<Vec<f64>> = (0..k)
            .map(|i| multicopy_mean(&set.resample_dense(copies, i), observable, copies, set.exec))
            .collect();
        report.jackknife_error = jackknife_error(&thetas?);
    }
    Ok(report)
}

/// Purity `Tr ρ²` from pairs of batches.
pub fn estimate_purity(set: &BatchedShadows) -> Result<EstimateReport> {
    require_batches(set, 2)?;
    let x2 = pair_mean(&set.realigned);
    let mut report = EstimateReport::new(Some(x2), Flag::NonPositiveMoment, 2, set.n_prime()).with_raw("x2", x2);
    report.jackknife_error = set.jackknife_realigned(2, |rs| Some(pair_mean(rs)));
    Ok(report)
}

/// Rényi-2 OE and its two parts, `S̃ = -log X4` and `R = -log X2`, with
/// `S = S̃ - 2R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Renyi2Estimate {
    pub oe: EstimateReport,
    pub unnormalized_oe: EstimateReport,
    pub purity_entropy: EstimateReport,
}

pub fn estimate_renyi2_oe(set: &BatchedShadows) -> Result<Renyi2Estimate> {
    require_batches(set, 4)?;
    let exec = set.exec;
    let x2 = pair_mean(&set.realigned);
    let x4 = quad_mean(&set.realigned, exec);
    let oe = |x2: f64, x4: f64| Some(-positive_log(x4)? + 2.0 * positive_log(x2)?);
    let n = set.n_prime();
    let with_raw = |r: EstimateReport| r.with_raw("x2", x2).with_raw("x4", x4);
    let mut s = with_raw(EstimateReport::new(oe(x2, x4), Flag::NonPositiveMoment, 4, n));
    let mut st = with_raw(EstimateReport::new(positive_log(x4).map(|l| -l), Flag::NonPositiveMoment, 4, n));
    let mut r2 = with_raw(EstimateReport::new(positive_log(x2).map(|l| -l), Flag::NonPositiveMoment, 2, n));
    if set.jackknife {
        let k = set.resample_count(4);
        let moments: Vec<(f64, f64)> = (0..k)
            .map(|i| {
                let rs = set.resample_realigned(4, i);
                (pair_mean(&rs), quad_mean(&rs, exec))
            })
            .collect();
        let err = |f: &dyn Fn(f64, f64) -> Option<f64>| -> Option<f64> {
            let thetas: Option<Vec<f64>> = moments.iter().map(|&(a, b)| f(a, b)).collect();
            (k >= 2).then_some(())?;
            jackknife_error(&thetas?)
        };
        s.jackknife_error = err(&oe);
        st.jackknife_error = err(&|_, b| positive_log(b).map(|l| -l));
        r2.jackknife_error = err(&|a, _| positive_log(a).map(|l| -l));
    }
    Ok(Renyi2Estimate { oe: s, unnormalized_oe: st, purity_entropy: r2 })
}

fn restrict_rows<M: Borrow<ComplexMatrix>>(rs: &[M], rows: &[usize]) -> Vec<ComplexMatrix> {
    rs.iter().map(|r| r.borrow().select_rows(rows)).collect()
}

fn sector_map(set: &BatchedShadows, charge: &ChargeOperator) -> Result<BTreeMap<i64, Vec<usize>>> {
    if charge.dim_a() != set.split.dim_a() {
        return Err(Error::DimensionMismatch { expected: set.split.dim_a(), found: charge.dim_a() });
    }
    Ok(oe_exact::sector_rows(&charge.supercharge_labels()?))
}

/// Sector numerators `mean Tr(Π_q R_a R_b†)`; they sum to the purity estimate.
fn sector_numerators<M: Borrow<ComplexMatrix>>(rs: &[M], sectors: &BTreeMap<i64, Vec<usize>>) -> BTreeMap<i64, f64> {
    sectors.iter().map(|(&q, rows)| (q, pair_mean(&restrict_rows(rs, rows)))).collect()
}

/// Estimated sector populations `p(q)` for every supercharge sector. They sum to one.
pub fn estimate_populations(set: &BatchedShadows, charge: &ChargeOperator) -> Result<BTreeMap<i64, EstimateReport>> {
    require_batches(set, 2)?;
    let sectors = sector_map(set, charge)?;
    let ratio = |rs: &[Cow<'_, ComplexMatrix>], q: i64| -> Option<f64> {
        let x2 = pair_mean(rs);
        let num = pair_mean(&restrict_rows(rs, &sectors[&q]));
        (x2.abs() > 0.0).then(|| num / x2)
    };
    let x2 = pair_mean(&set.realigned);
    let nums = sector_numerators(&set.realigned, &sectors);
    let mut out = BTreeMap::new();
    for (&q, &num) in &nums {
        let value = (x2.abs() > 0.0).then(|| num / x2);
        let mut report = EstimateReport::new(value, Flag::NonPositiveMoment, 2, set.n_prime())
            .with_raw("x2", x2)
            .with_raw("numerator", num)
            .with_metadata("q", q.to_string());
        report.jackknife_error = set.jackknife_realigned(2, |rs| ratio(rs, q));
        out.insert(q, report);
    }
    Ok(out)
}

fn sroe2_value<M: Borrow<ComplexMatrix> + Sync>(rs: &[M], rows: &[usize], exec: Execution) -> (Option<f64>, f64, f64) {
    let sub = restrict_rows(rs, rows);
    let num = pair_mean(&sub);
    let x4 = quad_mean(&sub, exec);
    let value = if num.abs() < SECTOR_FLOOR { None } else { positive_log(x4 / (num * num)).map(|l| -l) };
    (value, num, x4)
}

/// Rényi-2 OE of every supercharge sector.
pub fn estimate_sroe2(set: &BatchedShadows, charge: &ChargeOperator) -> Result<BTreeMap<i64, EstimateReport>> {
    require_batches(set, 4)?;
    let sectors = sector_map(set, charge)?;
    let mut out = BTreeMap::new();
    for (&q, rows) in &sectors {
        let (value, num, x4) = sroe2_value(&set.realigned, rows, set.exec);
        let flag = if num.abs() < SECTOR_FLOOR { Flag::EmptySector } else { Flag::NonPositiveMoment };
        let mut report = EstimateReport::new(value, flag, 4, set.n_prime())
            .with_raw("numerator", num)
            .with_raw("x4", x4)
            .with_metadata("q", q.to_string());
        if value.is_some() {
            report.jackknife_error = set.jackknife_realigned(4, |rs| sroe2_value(rs, rows, set.exec).0);
        }
        out.insert(q, report);
    }
    Ok(out)
}

/// Entanglement witnesses of an exactly known state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// `S2 - R2`; positive certifies entanglement.
    pub oe_minus_purity_entropy: f64,
    /// Violation of the centred fourth-moment condition; positive certifies
    /// entanglement. `None` when a marginal is pure.
    pub enhanced_value: Option<f64>,
    /// `√(Tr ρ²) Σλ - 1`; positive certifies entanglement.
    pub ccnr_margin: f64,
}

impl DetectionReport {
    pub fn detects(&self) -> bool {
        self.oe_minus_purity_entropy > 0.0
    }
}

pub fn detect_entanglement_exact(rho: &ComplexMatrix, reg: &QubitRegister) -> Result<DetectionReport> {
    let spec = oe_exact::operator_schmidt(rho, reg)?;
    let s2 = oe_exact::oe_renyi(&spec, 2.0)?;
    let r2 = -spec.purity().ln();
    let (ordered, d_a, d_b) = oe_exact::ab_ordered(rho, reg)?;
    let split = QubitRegister::bipartite(linop::qubit_count(d_a)?, linop::qubit_count(d_b)?);
    let rho_a = linop::partial_trace(&ordered, &split, &["A"])?;
    let rho_b = linop::partial_trace(&ordered, &split, &["B"])?;
    let centred = ordered.as_ref() - linop::kron(&rho_a, &rho_b);
    let chi = linop::singular_values(&linop::realign(&centred, d_a, d_b)?);
    let x2: f64 = chi.iter().map(|c| c * c).sum();
    let x4: f64 = chi.iter().map(|c| c.powi(4)).sum();
    let (p_a, p_b) = (linop::trace_product(&rho_a, &rho_a).re, linop::trace_product(&rho_b, &rho_b).re);
    let denom = (1.0 - p_a) * (1.0 - p_b);
    Ok(DetectionReport {
        oe_minus_purity_entropy: s2 - r2,
        enhanced_value: (denom > 1e-12).then(|| x2.powi(3) / denom - x4),
        ccnr_margin: oe_exact::ccnr_margin(&spec),
    })
}

/// Shadow estimate of `S2 - R2 = -log X4 + 3 log X2`.
pub fn detect_entanglement_shadows(set: &BatchedShadows) -> Result<EstimateReport> {
    let est = estimate_renyi2_oe(set)?;
    let (x2, x4) = (est.oe.raw["x2"], est.oe.raw["x4"]);
    let f = |x2: f64, x4: f64| Some(-positive_log(x4)? + 3.0 * positive_log(x2)?);
    let mut report = EstimateReport::new(f(x2, x4), Flag::NonPositiveMoment, 4, set.n_prime())
        .with_raw("x2", x2)
        .with_raw("x4", x4);
    report.jackknife_error = set.jackknife_realigned(4, |rs| f(pair_mean(rs), quad_mean(rs, set.exec)));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn z_basis_factors() {
        let f0 = shadow_factor(&PauliBasis::Z.unitary(), 0);
        assert_eq!(f0, ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(-1.0)])));
        let rec = MeasurementRecord { r: 1, m: 1, basis: Basis::Pauli(vec![PauliBasis::Y]), bits: vec![0] };
        let s = build_shadow(&rec).unwrap();
        // 3|+i><+i| - I.
        assert!((s[(0, 1)] - Complex64::new(0.0, -1.5)).norm() < 1e-12);
        assert!((linop::trace(&s) - ONE).norm() < 1e-12);
    }

    #[test]
    fn malformed_records() {
        let rec = MeasurementRecord { r: 1, m: 1, basis: Basis::Pauli(vec![PauliBasis::X]), bits: vec![0, 1] };
        assert!(matches!(build_shadow(&rec), Err(Error::MalformedRecord(_))));
        let bad = Matrix2::new(c(1.0), c(1.0), c(0.0), c(1.0));
        let rec = MeasurementRecord { r: 1, m: 1, basis: Basis::Unitary(vec![bad]), bits: vec![0] };
        assert!(matches!(build_shadow(&rec), Err(Error::NonUnitary(_))));
    }

    #[test]
    fn batching_rules() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let shadows: Vec<ComplexMatrix> = (0..10).map(|_| states::random_density(2, 2, &mut rng)).collect();
        let b = batch_shadows(&shadows, 10, BatchOrder::Contiguous).unwrap();
        assert!(b.iter().zip(&shadows).all(|(b, s)| &b.matrix == s));
        let b = batch_shadows(&shadows, 5, BatchOrder::Contiguous).unwrap();
        let mean_b = mean_of(&b.iter().map(|x| &x.matrix).collect::<Vec<_>>());
        assert!((mean_b - mean_of(&shadows)).norm() < 1e-14);
        let b = batch_shadows(&shadows, 3, BatchOrder::Contiguous).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[0].count, 3);
        assert!(matches!(batch_shadows(&shadows, 11, BatchOrder::Contiguous), Err(Error::TooFewBatches { .. })));
        let s1 = batch_shadows(&shadows, 2, BatchOrder::Shuffled { seed: 4 }).unwrap();
        let s2 = batch_shadows(&shadows, 2, BatchOrder::Shuffled { seed: 4 }).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn quad_mean_paths_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let rs: Vec<ComplexMatrix> = (0..9).map(|_| states::ginibre(3, 5, &mut rng)).collect();
        let a = quad_mean_enumerated(&rs, Execution::Parallel);
        let b = quad_mean_power_sums(&rs, Execution::Parallel);
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        let a = quad_mean_enumerated(&rs, Execution::Sequential);
        assert_eq!(a.to_bits(), quad_mean_enumerated(&rs, Execution::Parallel).to_bits());
    }

    #[test]
    fn jackknife_of_constant_is_zero() {
        assert_eq!(jackknife_error(&[1.0, 1.0, 1.0]), Some(0.0));
        assert_eq!(jackknife_error(&[1.0]), None);
        let e = jackknife_error(&[1.0, 2.0, 3.0]).unwrap();
        assert!((e - (2.0f64 / 3.0 * 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_detection_examples() {
        let reg = QubitRegister::bipartite(1, 1);
        let bell = detect_entanglement_exact(&states::bell(), &reg).unwrap();
        assert!((bell.oe_minus_purity_entropy - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(bell.detects());
        let product = states::product(&[states::maximally_mixed(1), linop::basis_projector(&[0])]);
        let p = detect_entanglement_exact(&product, &reg).unwrap();
        assert!(!p.detects());
        assert!(p.ccnr_margin <= 1e-12);
    }
}
