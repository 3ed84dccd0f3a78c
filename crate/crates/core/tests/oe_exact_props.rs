use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowbench::oe_exact::{self, ChargeOperator, ChargedMoments};
use shadowbench::{linop, states, ComplexMatrix, QubitRegister};

/// A charge-conserving state on `n_a + n_b` qubits with its register and charge.
fn symmetric_state(seed: u64, n_a: usize, n_b: usize, magnetization: bool) -> (ComplexMatrix, QubitRegister, ChargeOperator) {
    let charge = if magnetization {
        ChargeOperator::magnetization(n_a, n_b)
    } else {
        ChargeOperator::excitation_number(n_a, n_b)
    };
    let rho = states::random_block_diagonal(&charge.total_diagonal(), &mut ChaCha8Rng::seed_from_u64(seed));
    (rho, QubitRegister::bipartite(n_a, n_b), charge)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn resolved_coefficients_are_the_unresolved_multiset(seed: u64, n_a in 1usize..3, n_b in 1usize..3, magnetization: bool) {
        let (rho, reg, charge) = symmetric_state(seed, n_a, n_b, magnetization);
        let plain = sorted(oe_exact::operator_schmidt(&rho, &reg).unwrap().coefficients());
        let resolved = sorted(oe_exact::symmetry_resolved_schmidt(&rho, &reg, &charge).unwrap().coefficients());
        prop_assert_eq!(plain.len(), resolved.len());
        for (p, r) in plain.iter().zip(&resolved) {
            prop_assert!((p - r).abs() < 1e-8, "{p} vs {r}");
        }
    }

    #[test]
    fn populations_are_a_distribution(seed: u64, n_a in 1usize..3, n_b in 1usize..3, magnetization: bool) {
        let (rho, reg, charge) = symmetric_state(seed, n_a, n_b, magnetization);
        let pops = oe_exact::populations(&oe_exact::symmetry_resolved_schmidt(&rho, &reg, &charge).unwrap()).unwrap();
        prop_assert!((pops.total() - 1.0).abs() < 1e-10);
        prop_assert!(pops.iter().all(|(_, p)| p >= 0.0));
    }

    #[test]
    fn product_states_satisfy_ccnr(seed: u64, n_a in 1usize..3, n_b in 1usize..3, rank_a in 1usize..5, rank_b in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = linop::kron(&states::random_density(n_a, rank_a, &mut rng), &states::random_density(n_b, rank_b, &mut rng));
        let spec = oe_exact::operator_schmidt(&rho, &QubitRegister::bipartite(n_a, n_b)).unwrap();
        prop_assert!(oe_exact::ccnr_margin(&spec) <= 1e-10);
    }

    #[test]
    fn quadrature_matches_sector_power_sums(seed: u64, n_a in 1usize..3, n_b in 1usize..3, alpha in 1u32..4) {
        let (rho, reg, charge) = symmetric_state(seed, n_a, n_b, false);
        let spec = oe_exact::symmetry_resolved_schmidt(&rho, &reg, &charge).unwrap();
        let moments = ChargedMoments::new(&rho, &reg, &charge, alpha).unwrap();
        for q in spec.charges() {
            let direct: f64 = spec.sector(q).iter().map(|l| l.powi(2 * alpha as i32)).sum();
            let quadrature = moments.sector_moment(q).unwrap();
            prop_assert!((direct - quadrature).abs() < 1e-8, "q={q}: {direct} vs {quadrature}");
        }
    }

    #[test]
    fn super_reduced_matrix_commutes_with_block_supercharge(seed: u64, n_a in 1usize..3, n_b in 1usize..3, magnetization: bool) {
        let (rho, reg, charge) = symmetric_state(seed, n_a, n_b, magnetization);
        let m = oe_exact::super_reduced(&rho, &reg).unwrap();
        let labels = charge.supercharge_labels().unwrap();
        let commutator = ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (labels[j] - labels[i]) as f64);
        prop_assert!(linop::frobenius_norm(&commutator) < 1e-10);
    }
}
