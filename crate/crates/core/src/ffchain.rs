//! Operator entanglement of a free-fermion chain after a quench from the Néel state.
//!
//! The post-quench state is Gaussian, so the operator Schmidt spectrum of the
//! restricted state `ρ_AB` follows from `2ℓ_A` eigenvalues `ξ` of a super
//! correlation matrix. Charged moments are products over `ξ` and the sector
//! moments are the coefficients of that product as a polynomial in `e^{iθ}`.
//!
//! The chain has periodic boundaries, hopping `-J/2` between neighbours and
//! `A = [0, ℓ_A)`, `B = [ℓ_A, ℓ_A + ℓ_B)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linop::{self, ComplexMatrix};

/// Sectors whose weight falls below this are unpopulated.
pub const SECTOR_CUTOFF: f64 = 1e-12;
/// Tolerance on the correlation spectrum leaving `[0, 1]`.
pub const SPECTRUM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    #[serde(default = "unit_hopping")]
    pub hopping: f64,
    pub ell_a: usize,
    pub ell_b: usize,
}

fn unit_hopping() -> f64 {
    1.0
}

impl ChainSpec {
    pub fn new(n_sites: usize, ell_a: usize, ell_b: usize) -> Result<Self> {
        let spec = Self { n_sites, hopping: 1.0, ell_a, ell_b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell_a == 0 || self.ell_b == 0 || self.ell_a + self.ell_b > self.n_sites {
            return Err(Error::InvalidArgument(format!(
                "need 1 ≤ ℓ_A, ℓ_B and ℓ_A + ℓ_B ≤ N, got ℓ_A={}, ℓ_B={}, N={}",
                self.ell_a, self.ell_b, self.n_sites
            )));
        }
        if !self.hopping.is_finite() {
            return Err(Error::InvalidArgument("hopping must be finite".into()));
        }
        Ok(())
    }

    pub fn ell(&self) -> usize {
        self.ell_a + self.ell_b
    }

    pub fn hopping_matrix(&self) -> DMatrix<f64> {
        let n = self.n_sites;
        let mut h = DMatrix::zeros(n, n);
        if n > 1 {
            for i in 0..n {
                let j = (i + 1) % n;
                h[(i, j)] -= self.hopping / 2.0;
                h[(j, i)] -= self.hopping / 2.0;
            }
        }
        h
    }
}

/// Single-particle propagator `e^{iht}` of the chain, diagonalised once.
#[derive(Clone, Debug)]
pub struct ChainQuench {
    spec: ChainSpec,
    energies: Vec<f64>,
    modes: DMatrix<f64>,
}

impl ChainQuench {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        let eig = spec.hopping_matrix().symmetric_eigen();
        Ok(Self { spec: spec.clone(), energies: eig.eigenvalues.iter().copied().collect(), modes: eig.eigenvectors })
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    /// Rows `rows` of `e^{iht}` restricted to the initially occupied (odd) sites.
    fn occupied_columns(&self, rows: usize, t: f64) -> ComplexMatrix {
        let n = self.spec.n_sites;
        let occupied: Vec<usize> = (1..n).step_by(2).collect();
        let phases: Vec<Complex64> = self.energies.iter().map(|e| Complex64::from_polar(1.0, e * t)).collect();
        ComplexMatrix::from_fn(rows, occupied.len(), |i, c| {
            let j = occupied[c];
            (0..n).map(|k| phases[k] * self.modes[(i, k)] * self.modes[(j, k)]).sum()
        })
    }

    /// `⟨c_i† c_j⟩(t)` on the whole chain.
    pub fn correlations(&self, t: f64) -> ComplexMatrix {
        let w = self.occupied_columns(self.spec.n_sites, t);
        &w * w.adjoint()
    }

    /// `⟨c_i† c_j⟩(t)` for `i, j ∈ A ∪ B`.
    pub fn restricted_correlations(&self, t: f64) -> ComplexMatrix {
        let w = self.occupied_columns(self.spec.ell(), t);
        &w * w.adjoint()
    }

    pub fn super_correlations(&self, t: f64) -> Result<SuperCorrelations> {
        super_correlations(&self.restricted_correlations(t), self.spec.ell_a)
    }
}

/// `⟨c_i† c_j⟩(t)` on the whole chain.
pub fn quench_correlations(spec: &ChainSpec, t: f64) -> Result<ComplexMatrix> {
    Ok(ChainQuench::new(spec)?.correlations(t))
}

/// Super correlation matrix restricted to `A ⊗ Ã` and its eigenvalues.
#[derive(Clone, Debug)]
pub struct SuperCorrelations {
    pub block: ComplexMatrix,
    /// Ascending, clamped to `[0, 1]`.
    pub xi: Vec<f64>,
}

/// Builds the super correlation matrix of the restricted state from its mode
/// occupations `n` and returns its `A ⊗ Ã` block.
///
/// Each eigenmode of `C_AB` contributes the block
/// `[[n², n(1-n)], [n(1-n), (1-n)²]] / (n² + (1-n)²)` on `(d_k, d̃_k)`. Both copies
/// are rotated back with the same eigenvector matrix, so every block of the result
/// is a matrix function of `C_AB`.
pub fn super_correlations(c_ab: &ComplexMatrix, ell_a: usize) -> Result<SuperCorrelations> {
    let ell = c_ab.nrows();
    if c_ab.ncols() != ell || ell_a == 0 || ell_a > ell {
        return Err(Error::InvalidArgument(format!("bad restricted correlation matrix {}x{} for ℓ_A={ell_a}", ell, c_ab.ncols())));
    }
    let (occupations, w) = linop::hermitian_eigen(c_ab);
    check_unit_interval(&occupations)?;
    let occupations: Vec<f64> = occupations.iter().map(|n| n.clamp(0.0, 1.0)).collect();
    let matrix_fn = |f: &dyn Fn(f64) -> f64| -> ComplexMatrix {
        let mut scaled = w.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::new(f(occupations[k]), 0.0);
        }
        scaled * w.adjoint()
    };
    let norm = |n: f64| n * n + (1.0 - n) * (1.0 - n);
    let g11 = matrix_fn(&|n| n * n / norm(n));
    let g12 = matrix_fn(&|n| n * (1.0 - n) / norm(n));
    let g22 = matrix_fn(&|n| (1.0 - n) * (1.0 - n) / norm(n));
    let mut block = ComplexMatrix::zeros(2 * ell_a, 2 * ell_a);
    block.view_mut((0, 0), (ell_a, ell_a)).copy_from(&g11.view((0, 0), (ell_a, ell_a)));
    block.view_mut((0, ell_a), (ell_a, ell_a)).copy_from(&g12.view((0, 0), (ell_a, ell_a)));
    block.view_mut((ell_a, 0), (ell_a, ell_a)).copy_from(&g12.view((0, 0), (ell_a, ell_a)));
    block.view_mut((ell_a, ell_a), (ell_a, ell_a)).copy_from(&g22.view((0, 0), (ell_a, ell_a)));
    let xi = linop::hermitian_eigenvalues(&block);
    check_unit_interval(&xi)?;
    Ok(SuperCorrelations { block, xi: xi.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() })
}

fn check_unit_interval(values: &[f64]) -> Result<()> {
    match values.iter().find(|&&x| !(-SPECTRUM_TOLERANCE..=1.0 + SPECTRUM_TOLERANCE).contains(&x)) {
        Some(&x) => Err(Error::SpectrumOutOfRange(x)),
        None => Ok(()),
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `Z_α(θ) = e^{-iθℓ_A} Π_a (ξ_a^α e^{iθ} + (1-ξ_a)^α)`, accumulated in log space.
pub fn charged_moment(xi: &[f64], ell_a: usize, alpha: f64, theta: f64) -> Complex64 {
    let log: Complex64 = xi
        .iter()
        .map(|&x| (Complex64::from_polar(x.powf(alpha), theta) + (1.0 - x).powf(alpha)).ln())
        .sum();
    (log - Complex64::new(0.0, theta * ell_a as f64)).exp()
}

/// Total Rényi-α OE, `Σ_a log[ξ_a^α + (1-ξ_a)^α] / (1-α)`, or `Σ_a h(ξ_a)` at `α = 1`.
pub fn total_oe(xi: &[f64], alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        xi.iter().map(|&x| -xlogx(x) - xlogx(1.0 - x)).sum()
    } else {
        xi.iter().map(|&x| (x.powf(alpha) + (1.0 - x).powf(alpha)).ln()).sum::<f64>() / (1.0 - alpha)
    }
}

/// Sector moments `𝒵_α(q)` for `q ∈ [-ℓ_A, ℓ_A]`, stored as normalised
/// coefficients times `e^{log_scale}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorMoments {
    ell_a: usize,
    log_scale: f64,
    coefficients: Vec<f64>,
}

impl SectorMoments {
    /// Coefficients of `Π_a ((1-ξ_a)^α + ξ_a^α z)`. Each factor is normalised to unit
    /// sum before multiplying, so every partial product is a probability vector.
    pub fn new(xi: &[f64], ell_a: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("Rényi index must be positive, got {alpha}")));
        }
        let mut coefficients = vec![1.0];
        let mut log_scale = 0.0;
        for &x in xi {
            let (a0, a1) = ((1.0 - x).powf(alpha), x.powf(alpha));
            let s = a0 + a1;
            log_scale += s.ln();
            let (a0, a1) = (a0 / s, a1 / s);
            let mut next = vec![0.0; coefficients.len() + 1];
            for (m, &c) in coefficients.iter().enumerate() {
                next[m] += c * a0;
                next[m + 1] += c * a1;
            }
            coefficients = next;
        }
        Ok(Self { ell_a, log_scale, coefficients })
    }

    pub fn charges(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.coefficients.len()).map(|m| m as i64 - self.ell_a as i64)
    }

    pub fn log_moment(&self, q: i64) -> f64 {
        self.coefficient(q).ln() + self.log_scale
    }

    pub fn moment(&self, q: i64) -> f64 {
        self.log_moment(q).exp()
    }

    fn coefficient(&self, q: i64) -> f64 {
        let m = q + self.ell_a as i64;
        if m < 0 {
            0.0
        } else {
            self.coefficients.get(m as usize).copied().unwrap_or(0.0)
        }
    }
}

/// Von Neumann sector entropies `log P_q - P'_q / P_q` from the polynomial `P` at
/// `α = 1` and its α-derivative `P'`.
fn sector_entropies(xi: &[f64], ell_a: usize) -> BTreeMap<i64, (f64, f64)> {
    let mut p = vec![1.0];
    let mut dp = vec![0.0];
    for &x in xi {
        let (a0, a1) = (1.0 - x, x);
        let (d0, d1) = (xlogx(1.0 - x), xlogx(x));
        let mut np = vec![0.0; p.len() + 1];
        let mut ndp = vec![0.0; p.len() + 1];
        for m in 0..p.len() {
            np[m] += p[m] * a0;
            np[m + 1] += p[m] * a1;
            ndp[m] += dp[m] * a0 + p[m] * d0;
            ndp[m + 1] += dp[m] * a1 + p[m] * d1;
        }
        p = np;
        dp = ndp;
    }
    p.iter().zip(&dp).enumerate().map(|(m, (&pq, &dq))| (m as i64 - ell_a as i64, (pq, dq))).collect()
}

/// `𝒵_α(q)` by periodic trapezoid quadrature of `Z_α(θ)`. Exact once the node count
/// exceeds the polynomial degree, so this serves as an independent check of
/// [`SectorMoments`].
pub fn sector_moment_quadrature(xi: &[f64], ell_a: usize, alpha: f64, q: i64) -> Result<f64> {
    let mut nodes = (8 * ell_a).max(16);
    let mut previous: Option<f64> = None;
    loop {
        let sum: Complex64 = (0..nodes)
            .map(|j| {
                let theta = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / nodes as f64;
                Complex64::from_polar(1.0, -(q as f64) * theta) * charged_moment(xi, ell_a, alpha, theta)
            })
            .sum();
        let value = sum / nodes as f64;
        if value.im.abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("sector moment has imaginary part {}", value.im)));
        }
        if let Some(p) = previous {
            if (value.re - p).abs() <= 1e-9 {
                return Ok(value.re);
            }
        }
        if nodes > 1 << 20 {
            return Err(Error::InvalidArgument("quadrature did not converge".into()));
        }
        previous = Some(value.re);
        nodes *= 2;
    }
}

/// Rényi-α OE of sector `q`.
pub fn sroe_ff(xi: &[f64], ell_a: usize, alpha: f64, q: i64) -> Result<f64> {
    if (alpha - 1.0).abs() < 1e-12 {
        let table = sector_entropies(xi, ell_a);
        let &(p, dp) = table.get(&q).ok_or(Error::EmptySector(q))?;
        if p < SECTOR_CUTOFF {
            return Err(Error::EmptySector(q));
        }
        return Ok((p.ln() - dp / p).max(0.0));
    }
    let first = SectorMoments::new(xi, ell_a, 1.0)?;
    if first.moment(q) < SECTOR_CUTOFF {
        return Err(Error::EmptySector(q));
    }
    let moments = SectorMoments::new(xi, ell_a, alpha)?;
    Ok(((moments.log_moment(q) - alpha * first.log_moment(q)) / (1.0 - alpha)).max(0.0))
}

/// Sector populations `𝒵_1(q)`, including unpopulated sectors.
pub fn populations_ff(xi: &[f64], ell_a: usize) -> BTreeMap<i64, f64> {
    let m = SectorMoments::new(xi, ell_a, 1.0).expect("α = 1 is valid");
    m.charges().map(|q| (q, m.moment(q))).collect()
}

/// Lattice OE at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSnapshot {
    pub t: f64,
    pub total_oe: f64,
    /// `(q, p(q), S_q)` for populated sectors.
    pub sectors: Vec<(i64, f64, f64)>,
}

/// Lattice OE of Rényi index `alpha` over a time grid.
pub fn lattice_sweep(spec: &ChainSpec, times: &[f64], alpha: f64, exec: Execution) -> Result<Vec<LatticeSnapshot>> {
    let quench = ChainQuench::new(spec)?;
    exec.map(times.len(), |i| {
        let t = times[i];
        let xi = quench.super_correlations(t)?.xi;
        let sectors = populations_ff(&xi, spec.ell_a)
            .into_iter()
            .filter(|&(_, p)| p >= SECTOR_CUTOFF)
            .map(|(q, p)| Ok((q, p, sroe_ff(&xi, spec.ell_a, alpha, q)?)))
            .collect::<Result<_>>()?;
        Ok(LatticeSnapshot { t, total_oe: total_oe(&xi, alpha), sectors })
    })
    .into_iter()
    .collect()
}

/// Quasiparticle pairs shared between intervals of lengths `ℓ_A ≤ ℓ_B` at separation
/// time `x`.
pub fn overlap_profile(ell_a: f64, ell_b: f64, x: f64) -> f64 {
    let (a, b) = if ell_a <= ell_b { (ell_a, ell_b) } else { (ell_b, ell_a) };
    if x <= a / 2.0 {
        x
    } else if x <= b / 2.0 {
        a / 2.0
    } else if x <= (a + b) / 2.0 {
        (a + b) / 2.0 - x
    } else {
        0.0
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn refine(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    refine(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// `𝒥(t) = ∫ dk/2π f(|sin k| t)` over the Brillouin zone, split at the kinks of the
/// integrand.
pub fn quasiparticle_count(ell_a: f64, ell_b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let f = |k: f64| overlap_profile(ell_a, ell_b, t * k.sin());
    let half = std::f64::consts::FRAC_PI_2;
    let mut cuts = vec![0.0, half];
    for x in [ell_a / 2.0, ell_b / 2.0, (ell_a + ell_b) / 2.0] {
        if x < t {
            cuts.push((x / t).asin());
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let quarter: f64 = cuts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-12)).sum();
    // |sin k| repeats four times over [-π, π].
    quarter * 4.0 / (2.0 * std::f64::consts::PI)
}

/// Quasiparticle charged moment `Z_α(θ) = exp{[2(1-α) log 2 + 2 log cos(θ/2)] 𝒥}` for
/// `|θ| ≤ π`.
pub fn quasiparticle_charged_moment(j: f64, alpha: f64, theta: f64) -> f64 {
    ((2.0 * (1.0 - alpha) * 2f64.ln() + 2.0 * (theta / 2.0).cos().ln()) * j).exp()
}

/// `log 𝒵_1(q) = log Γ(2𝒥+1) - log Γ(𝒥+q+1) - log Γ(𝒥-q+1) - 2𝒥 log 2`, the exact
/// Fourier coefficient of `cos(θ/2)^{2𝒥}`. `None` when `𝒥 ≤ |q|`.
pub fn quasiparticle_log_population(j: f64, q: i64) -> Option<f64> {
    let q = q as f64;
    (j > q.abs()).then(|| ln_gamma(2.0 * j + 1.0) - ln_gamma(j + q + 1.0) - ln_gamma(j - q + 1.0) - 2.0 * j * 2f64.ln())
}

fn binary_entropy(x: f64) -> f64 {
    -xlogx(x) - xlogx(1.0 - x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiparticleParams {
    pub ell_a: f64,
    pub ell_b: f64,
    pub t: f64,
    pub q: i64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiparticlePrediction {
    pub quasiparticle_count: f64,
    /// `log Z_α(0)`.
    pub log_charged_moment: f64,
    /// Exact Fourier integral of the quasiparticle charged moments.
    pub sroe: f64,
    pub sroe_saddle_point: f64,
    /// `2𝒥 log 2 - q²/𝒥`.
    pub sroe_equipartition: f64,
    /// `π|q|/2`, valid while it precedes the plateau.
    pub delay_time: Option<f64>,
}

pub fn quasiparticle_prediction(p: &QuasiparticleParams) -> QuasiparticlePrediction {
    let j = quasiparticle_count(p.ell_a, p.ell_b, p.t);
    let q = p.q as f64;
    let delay_time = (q.abs() < p.ell_a.min(p.ell_b) / std::f64::consts::PI).then(|| std::f64::consts::PI * q.abs() / 2.0);
    let active = j > q.abs() && delay_time.is_none_or(|td| p.t > td);
    let sroe = match quasiparticle_log_population(j, p.q) {
        Some(log_z) if active => (2.0 * j * 2f64.ln() + log_z).max(0.0),
        _ => 0.0,
    };
    let (saddle, equipartition) = if active {
        (2.0 * j * binary_entropy((1.0 + q / j) / 2.0), 2.0 * j * 2f64.ln() - q * q / j)
    } else {
        (0.0, 0.0)
    };
    QuasiparticlePrediction {
        quasiparticle_count: j,
        log_charged_moment: 2.0 * (1.0 - p.alpha) * 2f64.ln() * j,
        sroe,
        sroe_saddle_point: saddle,
        sroe_equipartition: equipartition,
        delay_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_and_two_site_correlations() {
        let spec = ChainSpec::new(6, 2, 2).unwrap();
        let c0 = quench_correlations(&spec, 0.0).unwrap();
        for i in 0..6 {
            assert!((c0[(i, i)].re - (i % 2) as f64).abs() < 1e-12);
        }
        let c = quench_correlations(&spec, 3.7).unwrap();
        assert!((linop::trace(&c).re - 3.0).abs() < 1e-12);
        let pair = ChainSpec::new(2, 1, 1).unwrap();
        for t in [0.3, 1.1] {
            let c = quench_correlations(&pair, t).unwrap();
            assert!((c[(0, 0)].re - t.sin().powi(2)).abs() < 1e-12);
            assert!((c[(1, 1)].re - t.cos().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_blocks_at_half_filling() {
        let c = ComplexMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
        let s = super_correlations(&c, 1).unwrap();
        for x in s.block.iter() {
            assert!((x.re - 0.5).abs() < 1e-15);
        }
        let slater = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]));
        let s = super_correlations(&slater, 1).unwrap();
        assert!(s.xi.iter().all(|x| x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12));
        let bad = ComplexMatrix::identity(2, 2) * Complex64::new(1.5, 0.0);
        assert!(matches!(super_correlations(&bad, 1), Err(Error::SpectrumOutOfRange(_))));
    }

    #[test]
    fn charged_moment_identities() {
        let xi = [0.1, 0.45, 0.8, 0.97];
        assert!((charged_moment(&xi, 2, 1.0, 0.0) - 1.0).norm() < 1e-14);
        let pure = [0.0, 1.0, 1.0, 0.0];
        for theta in [0.3, 2.0] {
            assert!((charged_moment(&pure, 2, 2.0, theta).norm() - 1.0).abs() < 1e-14);
        }
        let z2 = charged_moment(&xi, 2, 2.0, 0.0).re;
        assert!((total_oe(&xi, 2.0) + z2.ln()).abs() < 1e-13);
        let m = SectorMoments::new(&xi, 2, 1.0).unwrap();
        let total: f64 = m.charges().map(|q| m.moment(q)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for alpha in [1.0, 2.0, 3.0] {
            let m = SectorMoments::new(&xi, 2, alpha).unwrap();
            for q in -2..=2 {
                let quad = sector_moment_quadrature(&xi, 2, alpha, q).unwrap();
                assert!((m.moment(q) - quad).abs() < 1e-12, "α={alpha} q={q}");
            }
        }
    }

    #[test]
    fn von_neumann_limit_is_continuous() {
        let xi = [0.2, 0.35, 0.6, 0.9, 0.05, 0.5];
        for q in -1..=1 {
            let s1 = sroe_ff(&xi, 3, 1.0, q).unwrap();
            let near = sroe_ff(&xi, 3, 1.0 + 1e-6, q).unwrap();
            assert!((s1 - near).abs() < 1e-5, "q={q}: {s1} vs {near}");
        }
    }

    #[test]
    fn quasiparticle_count_shapes() {
        for t in [0.5, 3.0, 10.0] {
            assert!((quasiparticle_count(40.0, 60.0, t) - 2.0 * t / std::f64::consts::PI).abs() < 1e-9);
        }
        assert_eq!(quasiparticle_count(40.0, 60.0, 0.0), 0.0);
        assert_eq!(overlap_profile(40.0, 60.0, 51.0), 0.0);
        assert_eq!(overlap_profile(60.0, 40.0, 25.0), 20.0);
        // Late times still see slow modes, so 𝒥 decays but stays positive.
        let late = quasiparticle_count(40.0, 60.0, 400.0);
        assert!(late > 0.0 && late < quasiparticle_count(40.0, 60.0, 20.0));
    }

    #[test]
    fn quasiparticle_sroe_forms() {
        let p = QuasiparticleParams { ell_a: 120.0, ell_b: 136.0, t: 40.0, q: 0, alpha: 1.0 };
        let pred = quasiparticle_prediction(&p);
        let j = pred.quasiparticle_count;
        assert!((pred.sroe_saddle_point - 2.0 * j * 2f64.ln()).abs() < 1e-12);
        let closed = quasiparticle_log_population(j, 3).unwrap();
        let direct = {
            let n = 4096;
            let sum: f64 = (0..n)
                .map(|i| {
                    let theta = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                    (3.0 * theta).cos() * (theta / 2.0).cos().powf(2.0 * j)
                })
                .sum();
            (sum / n as f64).ln()
        };
        assert!((closed - direct).abs() < 1e-9);
        let early = quasiparticle_prediction(&QuasiparticleParams { t: 2.0, q: 4, ..p.clone() });
        assert_eq!(early.sroe, 0.0);
        assert!((early.delay_time.unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }
}
