use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use shadowbench::bounds::{self, BatchCount, SweepConfig, SweepTarget, VarianceBudget};
use shadowbench::quench::QuenchState;
use shadowbench::shadows::Ensemble;
use shadowbench::Execution;

use crate::config::{self, invalid, Partition, StateSpec};
use crate::output::{self, num};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsMode {
    /// Closed-form variance and sample-count bounds.
    #[default]
    Analytic,
    /// Monte-Carlo relative errors of simulated estimators.
    Sweep,
}

/// A batch count in a config: an integer, or `"M"` for one batch per unitary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchCountSpec {
    Fixed(usize),
    Label(String),
}

impl BatchCountSpec {
    fn resolve(&self) -> anyhow::Result<BatchCount> {
        match self {
            BatchCountSpec::Fixed(n) if *n >= 2 => Ok(BatchCount::Fixed(*n)),
            BatchCountSpec::Fixed(n) => Err(invalid(format!("n_primes: {n} batches; need at least 2"))),
            BatchCountSpec::Label(s) if s == "M" => Ok(BatchCount::PerUnitary),
            BatchCountSpec::Label(s) => Err(invalid(format!("n_primes: expected an integer or \"M\", got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub mode: BoundsMode,
    pub target: SweepTarget,
    pub m_grid: Vec<usize>,
    pub n_primes: Vec<BatchCountSpec>,

    /// Qubits entering the analytic bounds.
    pub n_qubits: usize,
    pub eps: f64,
    pub delta: f64,
    /// Per-copy variance inputs; defaults to the worst case.
    pub vbar: Option<Vec<f64>>,

    pub state: StateSpec,
    pub partition: Option<Partition>,
    /// Evolution time for quench states.
    pub t: f64,
    pub ensembles: Vec<Ensemble>,
    pub repetitions: usize,
    pub seed: Option<u64>,

    pub output: Option<PathBuf>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            mode: BoundsMode::Analytic,
            target: SweepTarget::FourthMoment,
            m_grid: vec![10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000],
            n_primes: vec![
                BatchCountSpec::Fixed(4),
                BatchCountSpec::Fixed(10),
                BatchCountSpec::Fixed(20),
                BatchCountSpec::Label("M".into()),
            ],
            n_qubits: 4,
            eps: 0.1,
            delta: 0.05,
            vbar: None,
            state: StateSpec::default(),
            partition: None,
            t: 0.0,
            ensembles: vec![Ensemble::Pauli],
            repetitions: bounds::DEFAULT_REPETITIONS,
            seed: None,
            output: None,
        }
    }
}

fn copies(target: SweepTarget) -> usize {
    match target {
        SweepTarget::Purity => 2,
        SweepTarget::FourthMoment => 4,
    }
}

pub fn run(cfg: &BoundsConfig, exec: Execution) -> anyhow::Result<()> {
    let batch_counts = cfg.n_primes.iter().map(BatchCountSpec::resolve).collect::<anyhow::Result<Vec<_>>>()?;
    if cfg.m_grid.is_empty() || batch_counts.is_empty() {
        return Err(invalid("m_grid and n_primes must be non-empty"));
    }
    match cfg.mode {
        BoundsMode::Analytic => analytic(cfg, &batch_counts),
        BoundsMode::Sweep => sweep(cfg, batch_counts, exec),
    }
}

fn analytic(cfg: &BoundsConfig, batch_counts: &[BatchCount]) -> anyhow::Result<()> {
    if !(cfg.eps > 0.0 && cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(invalid("need eps > 0 and 0 < delta < 1"));
    }
    let n = copies(cfg.target);
    let n_qubits = cfg.n_qubits;
    let (sample_bound, single_variance): (u64, fn(usize, usize) -> f64) = match cfg.target {
        SweepTarget::Purity => (bounds::purity_sample_bound(n_qubits, cfg.eps, cfg.delta)?, bounds::purity_variance_bound),
        SweepTarget::FourthMoment => (bounds::x4_sample_bound(n_qubits, cfg.eps, cfg.delta)?, bounds::x4_variance_bound),
    };
    let mut w = output::csv_writer(cfg.output.as_deref())?;
    w.write_record(["M", "n_prime", "n_qubits", "variance_bound", "chebyshev_delta", "single_batch_variance_bound", "sample_bound"])?;
    for &m in &cfg.m_grid {
        for &bc in batch_counts {
            let n_prime = bc.resolve(m);
            if n_prime < n {
                log::warn!("skipping M={m}, n'={}: fewer batches than copies", bc.label());
                continue;
            }
            let budget = VarianceBudget::new(n, n_prime, m, n_qubits, cfg.vbar.clone())?;
            w.write_record([
                m.to_string(),
                bc.label(),
                n_qubits.to_string(),
                num(budget.variance_bound),
                num(budget.chebyshev_delta(cfg.eps)),
                num(single_variance(n_qubits, m)),
                sample_bound.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sweep(cfg: &BoundsConfig, batch_counts: Vec<BatchCount>, exec: Execution) -> anyhow::Result<()> {
    let seed = cfg.seed.ok_or_else(|| invalid("bounds sweep requires a seed (--seed or \"seed\" in the config)"))?;
    if cfg.ensembles.is_empty() {
        return Err(invalid("ensembles must be non-empty"));
    }
    let (rho, reg) = config::bipartite_state(&cfg.state, cfg.partition.as_ref(), cfg.t)?;
    let state = QuenchState::from_density(rho)?;
    let sweep = SweepConfig {
        target: cfg.target,
        m_grid: cfg.m_grid.clone(),
        batch_counts,
        ensembles: cfg.ensembles.clone(),
        repetitions: cfg.repetitions,
        seed,
    };
    let rows = bounds::empirical_error_sweep(&state, &reg, &sweep, exec).map_err(|e| invalid(e.to_string()))?;
    let mut w = output::csv_writer(cfg.output.as_deref())?;
    w.write_record(["M", "n_prime", "ensemble", "mean_error", "std_error"])?;
    for r in rows {
        let ensemble = match r.ensemble {
            Ensemble::Pauli => "pauli",
            Ensemble::Haar => "haar",
        };
        w.write_record([r.m.to_string(), r.n_prime.label(), ensemble.to_string(), num(r.mean_error), num(r.std_error)])?;
    }
    w.flush()?;
    Ok(())
}
