use proptest::prelude::*;
use rand::RngCore;
use shadowbench::bounds::{self, VarianceBudget};
use shadowbench::quench::QuenchState;
use shadowbench::shadows::{self, BatchOrder, BatchedShadows, Ensemble};
use shadowbench::{rng, states, Execution};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// With two batches of `M/2` shots each, a pair of batches shares `k` unitaries
    /// with probability `C(2,k) x^k (1-x)^{2-k}`, `x = 2/M`.
    #[test]
    fn two_batch_bound_has_closed_form(m in 2usize..100_000, v1 in 0.0f64..1e4, v2 in 0.0f64..1e8) {
        let bound = bounds::batch_variance_bound(2, 2, m, &[v1, v2]).unwrap();
        let m = m as f64;
        let expanded = 4.0 / m * (1.0 - 2.0 / m) * v1 + 4.0 / (m * m) * v2;
        prop_assert!((bound - expanded).abs() <= 1e-12 * expanded.max(1.0));
    }

    #[test]
    fn bound_is_nonnegative_and_nonincreasing_in_shots(n in 1usize..5, extra in 0usize..20, m in 1usize..5000, step in 1usize..5000, n_qubits in 1usize..5) {
        let n_prime = n + extra;
        let m = m.max(n_prime);
        let small = VarianceBudget::new(n, n_prime, m, n_qubits, None).unwrap().variance_bound;
        let large = VarianceBudget::new(n, n_prime, m + step, n_qubits, None).unwrap().variance_bound;
        prop_assert!(small >= 0.0 && large >= 0.0);
        prop_assert!(large <= small * (1.0 + 1e-12));
    }
}

/// Two-batch purity estimates of the two-qubit maximally mixed state, one per repetition.
fn purity_estimates(m: usize, reps: usize, seed: u64) -> Vec<f64> {
    let state = QuenchState::from_density(states::maximally_mixed(2)).unwrap();
    Execution::Parallel.map(reps, |rep| {
        let s = rng::stream(seed, &[m as u64, rep as u64]).next_u64();
        let records = shadows::randomized_measurements(&state, Ensemble::Pauli, m, 1, s, Execution::Sequential).unwrap();
        let set = BatchedShadows::from_records(&records, &[0], &[1], 2, BatchOrder::Contiguous).unwrap().without_jackknife();
        shadows::estimate_purity(&set).unwrap().value
    })
}

#[test]
fn empirical_purity_variance_respects_bounds() {
    for m in [48, 96, 192] {
        let xs = purity_estimates(m, 500, 61);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let batch = bounds::batch_variance_bound(2, 2, m, &bounds::default_vbar(2, 2)).unwrap();
        let purity = bounds::purity_variance_bound(2, m);
        assert!(var <= batch, "M={m}: variance {var:.4e} exceeds batch bound {batch:.4e}");
        assert!(var <= purity, "M={m}: variance {var:.4e} exceeds purity bound {purity:.4e}");
    }
}

#[test]
fn chebyshev_failure_rate_is_bounded() {
    for (eps, delta) in [(0.2, 0.2), (0.3, 0.1), (0.15, 0.3)] {
        let m = bounds::purity_sample_bound(2, eps, delta).unwrap() as usize;
        let xs = purity_estimates(m, 400, 67);
        let failures = xs.iter().filter(|x| (*x - 0.25).abs() >= eps).count();
        let rate = failures as f64 / xs.len() as f64;
        assert!(rate <= delta, "ε={eps}, δ={delta}, M={m}: failure rate {rate}");
    }
}
