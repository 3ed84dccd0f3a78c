//! Exact operator entanglement of bipartite density matrices.
//!
//! A state on `A ∪ B` is realigned so that its singular values are the operator
//! Schmidt coefficients. With a U(1) charge `Q_A + Q_B` commuting with the state the
//! realigned matrix is block diagonal in the supercharge `Q_A ⊗ 1 - 1 ⊗ Q_A^T`, and
//! each block yields the coefficients of one sector.
//!
//! Registers passed here must consist of exactly two blocks named `A` and `B`.
//! Logarithms are natural.

use std::borrow::Cow;
use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{self, ComplexMatrix, QubitRegister};

/// Coefficients below this fraction of the largest one are dropped.
pub const COEFFICIENT_CUTOFF: f64 = 1e-12;
/// Largest tolerated `‖[Q_A + Q_B, ρ]‖_F`.
pub const COMMUTATION_TOLERANCE: f64 = 1e-10;
/// Largest tolerated distance of a supercharge eigenvalue from an integer.
pub const CHARGE_ROUNDING_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtEntry {
    /// Supercharge sector, when resolved.
    pub charge: Option<i64>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    entries: Vec<SchmidtEntry>,
    purity: f64,
}

impl SchmidtSpectrum {
    /// Builds a spectrum from raw entries, normalising `Σλ² = 1` and applying the cutoff.
    pub fn from_entries(entries: Vec<SchmidtEntry>, purity: f64) -> Result<Self> {
        let norm: f64 = entries.iter().map(|e| e.coefficient * e.coefficient).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::EmptySpectrum);
        }
        let max = entries.iter().map(|e| e.coefficient).fold(0.0, f64::max) / norm;
        let mut entries: Vec<SchmidtEntry> = entries
            .into_iter()
            .map(|e| SchmidtEntry { charge: e.charge, coefficient: e.coefficient / norm })
            .filter(|e| e.coefficient > COEFFICIENT_CUTOFF * max)
            .collect();
        entries.sort_by(|a, b| a.charge.cmp(&b.charge).then(b.coefficient.total_cmp(&a.coefficient)));
        Ok(Self { entries, purity })
    }

    pub fn entries(&self) -> &[SchmidtEntry] {
        &self.entries
    }

    /// `Tr ρ²` of the decomposed state.
    pub fn purity(&self) -> f64 {
        self.purity
    }

    /// All coefficients, descending.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.entries.iter().map(|e| e.coefficient).collect();
        c.sort_by(|a, b| b.total_cmp(a));
        c
    }

    /// Operator Schmidt rank.
    pub fn rank(&self) -> usize {
        self.entries.len()
    }

    pub fn is_resolved(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.charge.is_some())
    }

    /// Sorted distinct sector labels.
    pub fn charges(&self) -> Vec<i64> {
        let mut q: Vec<i64> = self.entries.iter().filter_map(|e| e.charge).collect();
        q.dedup();
        q
    }

    /// Coefficients of sector `q`, descending.
    pub fn sector(&self, q: i64) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.charge == Some(q))
            .map(|e| e.coefficient)
            .collect()
    }

    /// `Σ_j (λ_j^(q))^{2α}`.
    pub fn sector_moment(&self, q: i64, alpha: f64) -> f64 {
        self.sector(q).iter().map(|l| l.powf(2.0 * alpha)).sum()
    }
}

/// Probability `p(q)` of each supercharge sector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SectorDistribution(BTreeMap<i64, f64>);

impl SectorDistribution {
    pub fn get(&self, q: i64) -> f64 {
        self.0.get(&q).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.0.iter().map(|(&q, &p)| (q, p))
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    /// `-Σ_q p(q) log p(q)`.
    pub fn shannon_entropy(&self) -> f64 {
        self.0.values().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
    }
}

/// Diagonal U(1) charge `Q_A ⊗ 1 + 1 ⊗ Q_B`, stored as the diagonals of both blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeOperator {
    diag_a: Vec<f64>,
    diag_b: Vec<f64>,
}

impl ChargeOperator {
    pub fn from_diagonals(diag_a: Vec<f64>, diag_b: Vec<f64>) -> Result<Self> {
        for d in [&diag_a, &diag_b] {
            linop::qubit_count(d.len())?;
            if d.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite charge".into()));
            }
        }
        Ok(Self { diag_a, diag_b })
    }

    /// Sum of a single-qubit charge `diag(on_zero, on_one)` over every qubit.
    pub fn site_sum(n_a: usize, n_b: usize, on_zero: f64, on_one: f64) -> Self {
        let diag = |n: usize| -> Vec<f64> {
            (0..1usize << n)
                .map(|i| {
                    let ones = i.count_ones() as f64;
                    ones * on_one + (n as f64 - ones) * on_zero
                })
                .collect()
        };
        Self { diag_a: diag(n_a), diag_b: diag(n_b) }
    }

    /// Number of qubits in `|1>`.
    pub fn excitation_number(n_a: usize, n_b: usize) -> Self {
        Self::site_sum(n_a, n_b, 0.0, 1.0)
    }

    /// `Σ σ^z`, with `|0>` carrying +1.
    pub fn magnetization(n_a: usize, n_b: usize) -> Self {
        Self::site_sum(n_a, n_b, 1.0, -1.0)
    }

    pub fn dim_a(&self) -> usize {
        self.diag_a.len()
    }

    pub fn dim_b(&self) -> usize {
        self.diag_b.len()
    }

    pub fn diag_a(&self) -> &[f64] {
        &self.diag_a
    }

    /// Diagonal of `Q_A + Q_B` on `A ⊗ B`.
    pub fn total_diagonal(&self) -> Vec<f64> {
        self.diag_a
            .iter()
            .flat_map(|qa| self.diag_b.iter().map(move |qb| qa + qb))
            .collect()
    }

    /// `‖[Q_A + Q_B, ρ]‖_F` for `ρ` ordered as `A ⊗ B`.
    pub fn commutator_norm(&self, rho: &ComplexMatrix) -> Result<f64> {
        let q = self.total_diagonal();
        if rho.nrows() != q.len() || rho.ncols() != q.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), found: rho.nrows() });
        }
        let mut acc = 0.0;
        for i in 0..q.len() {
            for j in 0..q.len() {
                acc += ((q[i] - q[j]) * rho[(i, j)].norm()).powi(2);
            }
        }
        Ok(acc.sqrt())
    }

    pub fn check_commutes(&self, rho: &ComplexMatrix) -> Result<()> {
        let residual = self.commutator_norm(rho)?;
        if residual < COMMUTATION_TOLERANCE {
            Ok(())
        } else {
            Err(Error::SymmetryViolation { residual })
        }
    }

    /// Integer supercharge eigenvalue of each basis state `(a, a')` of `A ⊗ Ã`,
    /// at index `a * d_A + a'`.
    pub fn supercharge_labels(&self) -> Result<Vec<i64>> {
        let d = self.diag_a.len();
        let mut out = Vec::with_capacity(d * d);
        for a in 0..d {
            for ap in 0..d {
                let x = self.diag_a[a] - self.diag_a[ap];
                let r = x.round();
                if (x - r).abs() > CHARGE_ROUNDING_TOLERANCE {
                    return Err(Error::NonIntegerCharge(x));
                }
                out.push(r as i64);
            }
        }
        Ok(out)
    }
}

/// `rho` with qubits reordered to `A` then `B`, plus `(d_A, d_B)`.
pub fn ab_ordered<'a>(rho: &'a ComplexMatrix, reg: &QubitRegister) -> Result<(Cow<'a, ComplexMatrix>, usize, usize)> {
    let a = reg.block("A")?;
    let b = reg.block("B")?;
    if reg.blocks().len() != 2 {
        return Err(Error::InvalidRegister("expected exactly the blocks A and B".into()));
    }
    if rho.nrows() != reg.dim() || rho.ncols() != reg.dim() {
        return Err(Error::DimensionMismatch { expected: reg.dim(), found: rho.nrows() });
    }
    let mut order: Vec<usize> = a.to_vec();
    order.sort_unstable();
    let mut tail = b.to_vec();
    tail.sort_unstable();
    order.extend(tail);
    let (da, db) = (1usize << a.len(), 1usize << b.len());
    if order.iter().enumerate().all(|(i, &q)| i == q) {
        Ok((Cow::Borrowed(rho), da, db))
    } else {
        Ok((Cow::Owned(linop::permute_qubits(rho, reg.n_qubits(), &order)?), da, db))
    }
}

fn validated(rho: &ComplexMatrix) -> Result<()> {
    let scale = linop::frobenius_norm(rho);
    if scale == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let defect = linop::hermiticity_defect(rho);
    if defect > 1e-9 * scale.max(1.0) {
        return Err(Error::InvalidArgument(format!("operator is not Hermitian (defect {defect:.3e})")));
    }
    Ok(())
}

/// Realigned matrix on `(A ⊗ Ã) × (B ⊗ B̃)` and its squared Frobenius norm `Tr ρ²`.
pub fn realigned(rho: &ComplexMatrix, reg: &QubitRegister) -> Result<(ComplexMatrix, f64)> {
    validated(rho)?;
    let (ordered, da, db) = ab_ordered(rho, reg)?;
    let r = linop::realign(&ordered, da, db)?;
    let purity = r.iter().map(|z| z.norm_sqr()).sum();
    Ok((r, purity))
}

pub fn operator_schmidt(rho: &ComplexMatrix, reg: &QubitRegister) -> Result<SchmidtSpectrum> {
    let (r, purity) = realigned(rho, reg)?;
    let entries = linop::singular_values(&r)
        .into_iter()
        .map(|s| SchmidtEntry { charge: None, coefficient: s })
        .collect();
    SchmidtSpectrum::from_entries(entries, purity)
}

/// Partial trace over `B ⊗ B̃` of `|ρ><ρ|`, i.e. `R R†` (unnormalised).
pub fn super_reduced(rho: &ComplexMatrix, reg: &QubitRegister) -> Result<ComplexMatrix> {
    let (r, _) = realigned(rho, reg)?;
    Ok(&r * r.adjoint())
}

/// Row indices of `A ⊗ Ã` grouped by supercharge sector.
pub(crate) fn sector_rows(labels: &[i64]) -> BTreeMap<i64, Vec<usize>> {
    let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    map
}

fn checked_charge(rho: &ComplexMatrix, reg: &QubitRegister, charge: &ChargeOperator) -> Result<()> {
    let (ordered, da, db) = ab_ordered(rho, reg)?;
    if charge.dim_a() != da || charge.dim_b() != db {
        return Err(Error::DimensionMismatch { expected: da * db, found: charge.dim_a() * charge.dim_b() });
    }
    charge.check_commutes(&ordered)
}

/// Schmidt coefficients tagged by supercharge sector.
///
/// Each sector block of the realigned matrix is decomposed separately; its singular
/// values are the square roots of the eigenvalues of the corresponding block of `R R†`.
pub fn symmetry_resolved_schmidt(
    rho: &ComplexMatrix,
    reg: &QubitRegister,
    charge: &ChargeOperator,
) -> Result<SchmidtSpectrum> {
    checked_charge(rho, reg, charge)?;
    sector_projected_schmidt(rho, reg, charge)
}

/// Singular values of each supercharge row block of the realigned matrix. These are
/// the quantities the shadow sector estimators target. They coincide with
/// [`symmetry_resolved_schmidt`] when the charge is conserved; otherwise the blocks
/// are projections and their union differs from the unresolved spectrum.
pub fn sector_projected_schmidt(
    rho: &ComplexMatrix,
    reg: &QubitRegister,
    charge: &ChargeOperator,
) -> Result<SchmidtSpectrum> {
    let (_, da, db) = ab_ordered(rho, reg)?;
    if charge.dim_a() != da || charge.dim_b() != db {
        return Err(Error::DimensionMismatch { expected: da * db, found: charge.dim_a() * charge.dim_b() });
    }
    let (r, purity) = realigned(rho, reg)?;
    let labels = charge.supercharge_labels()?;
    let mut entries = Vec::new();
    for (q, rows) in sector_rows(&labels) {
        let block = r.select_rows(rows.iter());
        for s in linop::singular_values(&block) {
            entries.push(SchmidtEntry { charge: Some(q), coefficient: s });
        }
    }
    SchmidtSpectrum::from_entries(entries, purity)
}

fn renyi_of_weights(weights: impl Iterator<Item = f64> + Clone, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("Rényi index {alpha} must be finite and ≥ 0")));
    }
    let positive = weights.filter(|&w| w > 0.0);
    let value = if alpha == 1.0 {
        positive.map(|w| -w * w.ln()).sum()
    } else if alpha == 0.0 {
        (positive.count() as f64).ln()
    } else {
        positive.map(|w| w.powf(alpha)).sum::<f64>().ln() / (1.0 - alpha)
    };
    Ok(value.max(0.0))
}

/// Rényi-α operator entanglement of the squared coefficients.
pub fn oe_renyi(spec: &SchmidtSpectrum, alpha: f64) -> Result<f64> {
    if spec.entries.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    renyi_of_weights(spec.entries.iter().map(|e| e.coefficient * e.coefficient), alpha)
}

pub fn populations(spec: &SchmidtSpectrum) -> Result<SectorDistribution> {
    if !spec.is_resolved() {
        return Err(Error::InvalidArgument("spectrum is not symmetry resolved".into()));
    }
    let mut map = BTreeMap::new();
    for e in &spec.entries {
        *map.entry(e.charge.unwrap_or_default()).or_insert(0.0) += e.coefficient * e.coefficient;
    }
    Ok(SectorDistribution(map))
}

/// Rényi-α entanglement of sector `q`, renormalised to unit weight.
pub fn sroe(spec: &SchmidtSpectrum, q: i64, alpha: f64) -> Result<f64> {
    let sector = spec.sector(q);
    let p: f64 = sector.iter().map(|l| l * l).sum();
    if sector.is_empty() || !(p > 0.0) {
        return Err(Error::EmptySector(q));
    }
    renyi_of_weights(sector.iter().map(|l| l * l / p), alpha)
}

/// CCNR margin `√(Tr ρ²) Σλ - 1`; positive values certify entanglement.
pub fn ccnr_margin(spec: &SchmidtSpectrum) -> f64 {
    spec.purity.sqrt() * spec.entries.iter().map(|e| e.coefficient).sum::<f64>() - 1.0
}

/// Flux-inserted moments `Z_α(θ) = Tr[M^α e^{iθ𝒬_A}]` of the normalised super-reduced
/// matrix `M = R R† / Tr ρ²`.
#[derive(Clone, Debug)]
pub struct ChargedMoments {
    labels: Vec<i64>,
    diagonal: Vec<f64>,
}

impl ChargedMoments {
    pub fn new(rho: &ComplexMatrix, reg: &QubitRegister, charge: &ChargeOperator, alpha: u32) -> Result<Self> {
        if alpha == 0 {
            return Err(Error::InvalidArgument("charged moments need α ≥ 1".into()));
        }
        checked_charge(rho, reg, charge)?;
        let (r, purity) = realigned(rho, reg)?;
        let m = &r * r.adjoint() / Complex64::new(purity, 0.0);
        let mut power = m.clone();
        for _ in 1..alpha {
            power = &power * &m;
        }
        Ok(Self {
            labels: charge.supercharge_labels()?,
            diagonal: power.diagonal().iter().map(|z| z.re).collect(),
        })
    }

    pub fn at(&self, theta: f64) -> Complex64 {
        self.labels
            .iter()
            .zip(&self.diagonal)
            .map(|(&l, &w)| Complex64::from_polar(w, theta * l as f64))
            .sum()
    }

    fn label_range(&self) -> (i64, i64) {
        let min = self.labels.iter().copied().min().unwrap_or(0);
        let max = self.labels.iter().copied().max().unwrap_or(0);
        (min, max)
    }

    /// `𝒵_α(q) = ∫ dθ/2π e^{-iqθ} Z_α(θ)` by periodic trapezoid quadrature, doubling the
    /// node count until successive values agree to 1e-9.
    pub fn sector_moment(&self, q: i64) -> Result<f64> {
        let (min, max) = self.label_range();
        let mut nodes = 4 * (max - min + 1) as usize;
        let eval = |k: usize| -> Complex64 {
            let step = std::f64::consts::TAU / k as f64;
            let sum: Complex64 = (0..k)
                .map(|j| {
                    let theta = -std::f64::consts::PI + step * j as f64;
                    Complex64::from_polar(1.0, -(q as f64) * theta) * self.at(theta)
                })
                .sum();
            sum / k as f64
        };
        let mut prev = eval(nodes);
        for _ in 0..12 {
            nodes *= 2;
            let next = eval(nodes);
            if (next - prev).norm() < 1e-9 {
                if next.im.abs() > 1e-8 {
                    return Err(Error::InvalidArgument(format!(
                        "sector moment has imaginary part {:.3e}",
                        next.im
                    )));
                }
                return Ok(next.re);
            }
            prev = next;
        }
        Err(Error::InvalidArgument("θ quadrature did not converge".into()))
    }
}

pub fn charged_moments_exact(
    rho: &ComplexMatrix,
    reg: &QubitRegister,
    charge: &ChargeOperator,
    alpha: u32,
    theta: f64,
) -> Result<Complex64> {
    Ok(ChargedMoments::new(rho, reg, charge, alpha)?.at(theta))
}

/// Part of `rho` (ordered `A ⊗ B`) that commutes with the total charge: entries
/// between different charge eigenvalues are removed.
pub fn charge_dephased(rho: &ComplexMatrix, charge: &ChargeOperator) -> Result<ComplexMatrix> {
    let q = charge.total_diagonal();
    if rho.nrows() != q.len() || rho.ncols() != q.len() {
        return Err(Error::DimensionMismatch { expected: q.len(), found: rho.nrows() });
    }
    Ok(ComplexMatrix::from_fn(q.len(), q.len(), |i, j| {
        if (q[i] - q[j]).abs() < CHARGE_ROUNDING_TOLERANCE {
            rho[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::partial_trace_qubits;
    use crate::states;

    fn golden_rho() -> ComplexMatrix {
        let c = |x: f64| Complex64::new(x, 0.0);
        let psi = states::single_excitation_triplet(c((5.0f64 / 12.0).sqrt()), c(0.5), c(1.0 / 3f64.sqrt()));
        partial_trace_qubits(&states::pure(&psi), 3, &[0, 1]).unwrap()
    }

    #[test]
    fn product_state_has_single_coefficient() {
        let reg = QubitRegister::bipartite(1, 1);
        let rho = states::product(&[states::maximally_mixed(1), states::pure(&states::basis_vector(1, 1))]);
        let spec = operator_schmidt(&rho, &reg).unwrap();
        assert_eq!(spec.rank(), 1);
        assert!((spec.coefficients()[0] - 1.0).abs() < 1e-12);
        for alpha in [0.0, 0.5, 1.0, 2.0, 3.0] {
            assert!(oe_renyi(&spec, alpha).unwrap().abs() < 1e-12);
        }
        let charge = ChargeOperator::excitation_number(1, 1);
        let resolved = symmetry_resolved_schmidt(&rho, &reg, &charge).unwrap();
        assert_eq!(resolved.rank(), 1);
        assert_eq!(resolved.entries()[0].charge, Some(0));
        assert!((resolved.entries()[0].coefficient - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_reduced_state() {
        // ρ_AB = (α|10> + β|01>)(h.c.) + |γ|²|00><00|.
        let rho = golden_rho();
        let a2 = 5.0 / 12.0;
        let ab = (5.0f64 / 12.0).sqrt() * 0.5;
        assert!((rho[(0, 0)].re - 1.0 / 3.0).abs() < 1e-15);
        assert!((rho[(2, 2)].re - a2).abs() < 1e-15);
        assert!((rho[(1, 1)].re - 0.25).abs() < 1e-15);
        assert!((rho[(1, 2)].re - ab).abs() < 1e-15);
        assert!(rho[(3, 3)].norm() < 1e-15);
    }

    #[test]
    fn golden_purity_and_charged_moment() {
        let rho = golden_rho();
        let reg = QubitRegister::bipartite(1, 1);
        let charge = ChargeOperator::excitation_number(1, 1);
        let spec = symmetry_resolved_schmidt(&rho, &reg, &charge).unwrap();
        assert!((spec.purity() - 5.0 / 9.0).abs() < 1e-14);
        let moments = ChargedMoments::new(&rho, &reg, &charge, 1).unwrap();
        assert!((moments.at(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((moments.sector_moment(0).unwrap() - 10.0 / 16.0).abs() < 1e-12);
        assert!((moments.sector_moment(1).unwrap() - 3.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_spectrum_entropy_is_log_rank() {
        let spec = SchmidtSpectrum::from_entries(
            (0..4).map(|_| SchmidtEntry { charge: None, coefficient: 0.5 }).collect(),
            1.0,
        )
        .unwrap();
        for alpha in [0.0, 0.5, 1.0, 2.0, 7.0] {
            assert!((oe_renyi(&spec, alpha).unwrap() - 4f64.ln()).abs() < 1e-12);
        }
        assert!(oe_renyi(&spec, -1.0).is_err());
    }

    #[test]
    fn error_paths() {
        let reg = QubitRegister::bipartite(1, 1);
        assert!(matches!(operator_schmidt(&ComplexMatrix::zeros(4, 4), &reg), Err(Error::ZeroOperator)));
        let not_commuting = states::product(&[
            ComplexMatrix::from_element(2, 2, Complex64::new(0.5, 0.0)),
            states::maximally_mixed(1),
        ]);
        let charge = ChargeOperator::excitation_number(1, 1);
        assert!(matches!(
            symmetry_resolved_schmidt(&not_commuting, &reg, &charge),
            Err(Error::SymmetryViolation { residual }) if residual > 0.1
        ));
        let dephased = charge_dephased(&not_commuting, &charge).unwrap();
        assert!(charge.check_commutes(&dephased).is_ok());
        assert!((linop::trace(&dephased) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let spec = symmetry_resolved_schmidt(&states::maximally_mixed(2), &reg, &charge).unwrap();
        assert!(matches!(sroe(&spec, 5, 1.0), Err(Error::EmptySector(5))));
        let unresolved = operator_schmidt(&states::bell(), &reg).unwrap();
        assert!(populations(&unresolved).is_err());
        let half = ChargeOperator::from_diagonals(vec![0.0, 0.5], vec![0.0, 0.5]).unwrap();
        assert!(matches!(half.supercharge_labels(), Err(Error::NonIntegerCharge(_))));
    }

    #[test]
    fn register_blocks_in_any_order() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let rho = states::random_density(3, 3, &mut rng);
        let a_first = QubitRegister::new(3, vec![("A", vec![0]), ("B", vec![1, 2])]).unwrap();
        let a_last = QubitRegister::new(3, vec![("B", vec![0, 1]), ("A", vec![2])]).unwrap();
        let swapped = linop::permute_qubits(&rho, 3, &[1, 2, 0]).unwrap();
        let s1 = operator_schmidt(&rho, &a_first).unwrap().coefficients();
        let s2 = operator_schmidt(&swapped, &a_last).unwrap().coefficients();
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
