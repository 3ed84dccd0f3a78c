//! Variance and sample-complexity bounds for batch-shadow estimators, and a
//! Monte-Carlo harness that measures the actual estimator error.
//!
//! `M` counts measured unitaries with one shot each.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linop::{self, ComplexMatrix, QubitRegister};
use crate::quench::QuenchState;
use crate::shadows::{self, BatchOrder, BatchedShadows, Ensemble, Split};
use crate::{oe_exact, rng};

/// Repetitions per grid point unless configured otherwise.
pub const DEFAULT_REPETITIONS: usize = 200;

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Worst-case `V̄_k = 3^{kN}` for `k = 1..=n`.
pub fn default_vbar(n_copies: usize, n_qubits: usize) -> Vec<f64> {
    (1..=n_copies).map(|k| 3f64.powi((k * n_qubits) as i32)).collect()
}

/// Variance bound of the `n`-copy estimator with `n_prime` batches from `m` shots:
/// `Σ_j C(n,j) C(n'-n,n-j)/C(n',n) Σ_k C(j,k) (n'/M)^k (1-n'/M)^{j-k} V̄_k`.
/// `vbar[k-1]` holds `V̄_k`.
pub fn batch_variance_bound(n: usize, n_prime: usize, m: usize, vbar: &[f64]) -> Result<f64> {
    if n == 0 || n > n_prime || n_prime > m {
        return Err(Error::InvalidArgument(format!("need 1 ≤ n ≤ n' ≤ M, got n={n}, n'={n_prime}, M={m}")));
    }
    if vbar.len() < n || vbar.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("need {n} nonnegative V̄_k values")));
    }
    let x = n_prime as f64 / m as f64;
    let total = binomial(n_prime, n);
    let mut bound = 0.0;
    for j in 1..=n {
        let weight = binomial(n, j) * binomial(n_prime - n, n - j) / total;
        if weight == 0.0 {
            continue;
        }
        let inner: f64 = (1..=j).map(|k| binomial(j, k) * x.powi(k as i32) * (1.0 - x).powi((j - k) as i32) * vbar[k - 1]).sum();
        bound += weight * inner;
    }
    Ok(bound)
}

/// Purity-estimator bound `4/M 2^N + 4/M² 3^{2N}` for two batches of Pauli shadows.
pub fn purity_variance_bound(n_qubits: usize, m: usize) -> f64 {
    let m = m as f64;
    4.0 / m * 2f64.powi(n_qubits as i32) + 4.0 / (m * m) * 9f64.powi(n_qubits as i32)
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("ε and δ must lie in (0, 1), got ε={eps}, δ={delta}")));
    }
    Ok(())
}

/// Shots after which the purity estimate is `ε`-accurate with probability `1 - δ`:
/// `2·3^N/(ε√δ) (√(1+a²) + a)` with `a = (2/3)^N/(ε√δ)`, rounded up.
pub fn purity_sample_bound(n_qubits: usize, eps: f64, delta: f64) -> Result<u64> {
    check_eps_delta(eps, delta)?;
    let s = eps * delta.sqrt();
    let a = (2.0f64 / 3.0).powi(n_qubits as i32) / s;
    Ok((2.0 * 3f64.powi(n_qubits as i32) / s * ((1.0 + a * a).sqrt() + a)).ceil() as u64)
}

/// Shots sufficient for an `ε`-accurate fourth moment with probability `1 - δ`:
/// `4·3^N / ((1 + ε²δ)^{1/4} - 1)`, rounded up.
pub fn x4_sample_bound(n_qubits: usize, eps: f64, delta: f64) -> Result<u64> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("ε and δ must be positive, got ε={eps}, δ={delta}")));
    }
    Ok((4.0 * 3f64.powi(n_qubits as i32) / ((1.0 + eps * eps * delta).powf(0.25) - 1.0)).ceil() as u64)
}

/// `(1 + 4·3^N/M)^4 - 1`.
pub fn x4_variance_bound(n_qubits: usize, m: usize) -> f64 {
    (1.0 + 4.0 * 3f64.powi(n_qubits as i32) / m as f64).powi(4) - 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceBudget {
    pub n: usize,
    pub n_prime: usize,
    pub m: usize,
    pub n_qubits: usize,
    pub vbar: Vec<f64>,
    pub variance_bound: f64,
}

impl VarianceBudget {
    /// `vbar` defaults to [`default_vbar`].
    pub fn new(n: usize, n_prime: usize, m: usize, n_qubits: usize, vbar: Option<Vec<f64>>) -> Result<Self> {
        let vbar = vbar.unwrap_or_else(|| default_vbar(n, n_qubits));
        let variance_bound = batch_variance_bound(n, n_prime, m, &vbar)?;
        Ok(Self { n, n_prime, m, n_qubits, vbar, variance_bound })
    }

    /// Chebyshev failure probability for accuracy `eps`.
    pub fn chebyshev_delta(&self, eps: f64) -> f64 {
        (self.variance_bound / (eps * eps)).min(1.0)
    }
}

/// Functional whose relative estimation error is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTarget {
    /// `Tr ρ²`.
    Purity,
    /// `Tr(𝒮 ρ^{⊗4})`.
    FourthMoment,
}

impl SweepTarget {
    fn copies(self) -> usize {
        match self {
            SweepTarget::Purity => 2,
            SweepTarget::FourthMoment => 4,
        }
    }
}

/// Number of batches: fixed, or one per unitary (the U-statistic).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchCount {
    Fixed(usize),
    PerUnitary,
}

impl BatchCount {
    pub fn resolve(self, m: usize) -> usize {
        match self {
            BatchCount::Fixed(n) => n.min(m),
            BatchCount::PerUnitary => m,
        }
    }

    pub fn label(self) -> String {
        match self {
            BatchCount::Fixed(n) => n.to_string(),
            BatchCount::PerUnitary => "M".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub target: SweepTarget,
    pub m_grid: Vec<usize>,
    pub batch_counts: Vec<BatchCount>,
    pub ensembles: Vec<Ensemble>,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub n_prime: BatchCount,
    pub ensemble: Ensemble,
    /// Mean of `|X̃ - X| / X` over repetitions.
    pub mean_error: f64,
    /// Standard error of that mean.
    pub std_error: f64,
}

fn exact_target(rho: &ComplexMatrix, reg: &QubitRegister, target: SweepTarget) -> Result<f64> {
    let purity = linop::trace_product(rho, rho).re;
    Ok(match target {
        SweepTarget::Purity => purity,
        SweepTarget::FourthMoment => {
            let spec = oe_exact::operator_schmidt(rho, reg)?;
            purity * purity * spec.coefficients().iter().map(|l| l.powi(4)).sum::<f64>()
        }
    })
}

/// Relative estimator error over a grid of shot counts and batch counts.
///
/// Each repetition simulates one dataset per `(M, ensemble)` and reuses it for
/// every batch count, so batch counts are compared on identical data.
/// Repetition `i` draws from stream `(seed, [i, M, ensemble])`.
pub fn empirical_error_sweep(state: &QuenchState, reg: &QubitRegister, config: &SweepConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    let rho = state.density();
    if reg.n_qubits() != state.n_qubits() {
        return Err(Error::DimensionMismatch { expected: state.n_qubits(), found: reg.n_qubits() });
    }
    let exact = exact_target(&rho, reg, config.target)?;
    if exact.abs() < 1e-14 {
        return Err(Error::InvalidArgument("target functional vanishes; relative error undefined".into()));
    }
    if config.repetitions < 2 {
        return Err(Error::InvalidArgument("need at least two repetitions".into()));
    }
    let a = reg.block("A")?.to_vec();
    let b = reg.block("B")?.to_vec();
    if a.len() + b.len() != state.n_qubits() {
        return Err(Error::InvalidRegister("sweep blocks A and B must cover every qubit".into()));
    }
    let qubits: Vec<usize> = a.iter().chain(&b).copied().collect();
    let split = Split::new(a.len(), b.len());
    let mut rows = Vec::new();
    for (e_idx, &ensemble) in config.ensembles.iter().enumerate() {
        for &m in &config.m_grid {
            if m < config.target.copies() {
                return Err(Error::TooFewBatches { needed: config.target.copies(), available: m });
            }
            let errors: Vec<Result<Vec<f64>>> = exec.map(config.repetitions, |rep| {
                let seed = rng::stream(config.seed, &[rep as u64, m as u64, e_idx as u64]).next_u64();
                let records = shadows::randomized_measurements(state, ensemble, m, 1, seed, Execution::Sequential)?;
                let unitary = shadows::unitary_shadows(&records, &qubits, Execution::Sequential)?;
                config
                    .batch_counts
                    .iter()
                    .map(|bc| {
                        let set = BatchedShadows::new(unitary.clone(), split, bc.resolve(m), BatchOrder::Contiguous)?
                            .with_execution(Execution::Sequential)
                            .without_jackknife();
                        let est = match config.target {
                            SweepTarget::Purity => shadows::estimate_purity(&set)?.value,
                            SweepTarget::FourthMoment => {
                                let rs: Vec<ComplexMatrix> = set
                                    .batches()
                                    .iter()
                                    .map(|b| linop::realign(&b.matrix, split.dim_a(), split.dim_b()))
                                    .collect::<Result<_>>()?;
                                shadows::quad_mean(&rs, Execution::Sequential)
                            }
                        };
                        Ok((est - exact).abs() / exact.abs())
                    })
                    .collect()
            });
            let errors: Vec<Vec<f64>> = errors.into_iter().collect::<Result<_>>()?;
            for (k, &bc) in config.batch_counts.iter().enumerate() {
                let samples: Vec<f64> = errors.iter().map(|e| e[k]).collect();
                let n = samples.len() as f64;
                let mean = samples.iter().sum::<f64>() / n;
                let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                rows.push(SweepRow { m, n_prime: bc, ensemble, mean_error: mean, std_error: (var / n).sqrt() });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(4, 5), 0.0);
        assert_eq!(binomial(0, 0), 1.0);
    }

    #[test]
    fn simplified_form_at_n_prime_equal_n() {
        let vbar = [3.0, 11.0, 40.0];
        for m in [5usize, 17, 1000] {
            let x = 3.0 / m as f64;
            let simple: f64 = (1..=3)
                .map(|k| binomial(3, k) * x.powi(k as i32) * (1.0 - x).powi(3 - k as i32) * vbar[k - 1])
                .sum();
            assert!((batch_variance_bound(3, 3, m, &vbar).unwrap() - simple).abs() < 1e-12 * simple);
        }
        assert!(batch_variance_bound(3, 2, 10, &vbar).is_err());
        assert!(batch_variance_bound(2, 4, 3, &vbar).is_err());
    }

    #[test]
    fn purity_bound_arithmetic() {
        let s = 0.5 * 0.5f64.sqrt();
        let a = (2.0 / 3.0) / s;
        let expected = (6.0 / s * ((1.0 + a * a).sqrt() + a)).ceil() as u64;
        assert_eq!(purity_sample_bound(1, 0.5, 0.5).unwrap(), expected);
        assert!(purity_sample_bound(1, 1.5, 0.5).is_err());
        // The bound makes the Chebyshev variance budget tight.
        let m = purity_sample_bound(3, 0.1, 0.2).unwrap() as usize;
        assert!(purity_variance_bound(3, m) <= 0.1 * 0.1 * 0.2 * (1.0 + 1e-9));
        assert!(purity_variance_bound(3, m - 1) > 0.1 * 0.1 * 0.2);
    }

    #[test]
    fn x4_bounds() {
        assert!((x4_variance_bound(3, 4 * 27) - 15.0).abs() < 1e-12);
        let m = x4_sample_bound(4, 0.01, 0.1).unwrap() as f64;
        let asymptotic = 16.0 * 81.0 / (0.01 * 0.01 * 0.1);
        assert!((m / asymptotic - 1.0).abs() < 1e-4);
    }
}
