use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowbench::oe_exact::{self, ChargeOperator};
use shadowbench::quench::{self, HamiltonianSpec, Propagator, QuenchState, SpinModel};
use shadowbench::shadows::haar_single_qubit;
use shadowbench::{linop, states, QubitRegister};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chain(n: usize, model: SpinModel, field: f64) -> HamiltonianSpec {
    HamiltonianSpec { field, model, ..HamiltonianSpec::ion_chain(n) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_preserves_trace_positivity_and_energy(
        seed: u64,
        n in 2usize..6,
        rank in 1usize..4,
        t in 0.0f64..5.0,
        xy: bool,
        field in -3.0f64..3.0,
    ) {
        let model = if xy { SpinModel::Xy } else { SpinModel::Ising };
        let prop = Propagator::new(&chain(n, model, field)).unwrap();
        let initial = QuenchState::from_density(states::random_density(n, rank, &mut ChaCha8Rng::seed_from_u64(seed))).unwrap();
        let evolved = quench::evolve(&prop, &initial, t).unwrap();
        prop_assert!((evolved.trace() - 1.0).abs() < 1e-9);
        let rho = evolved.density();
        prop_assert!(linop::hermiticity_defect(&rho) < 1e-9);
        prop_assert!(linop::hermitian_eigenvalues(&rho).iter().all(|&e| e >= -1e-10));
        prop_assert!((prop.energy(&evolved) - prop.energy(&initial)).abs() < 1e-8);
    }

    #[test]
    fn xy_dynamics_conserves_magnetization(n in 2usize..8, t in 0.0f64..10.0) {
        let prop = Propagator::new(&chain(n, SpinModel::Xy, 22.0)).unwrap();
        let initial = QuenchState::neel(n);
        let evolved = quench::evolve(&prop, &initial, t).unwrap();
        prop_assert!((evolved.magnetization() - initial.magnetization()).abs() < 1e-10);
    }
}

#[test]
fn sampled_frequencies_pass_chi_squared() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let state = QuenchState::from_vector(states::random_pure(3, &mut rng)).unwrap();
    let bases: Vec<_> = (0..3).map(|_| haar_single_qubit(&mut rng)).collect();
    let probs = quench::born_probabilities(&state, &bases).unwrap();
    let shots = 100_000;
    let mut counts = [0usize; 8];
    for _ in 0..shots {
        counts[quench::bits_to_index(&quench::sample_bitstring(&state, &bases, &mut rng).unwrap())] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&c, &p)| {
            let expected = p * shots as f64;
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(7.0).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "χ² = {chi2:.2}, p = {p_value:.4}");
}

#[test]
fn maximally_mixed_outcomes_are_uniform_in_any_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let state = QuenchState::from_density(states::maximally_mixed(3)).unwrap();
    for _ in 0..20 {
        let bases: Vec<_> = (0..3).map(|_| haar_single_qubit(&mut rng)).collect();
        let probs = quench::born_probabilities(&state, &bases).unwrap();
        assert!(probs.iter().all(|p| (p - 0.125).abs() < 1e-12));
    }
}

/// The strong field suppresses excitation-number changes, so sector weights of the
/// Ising dynamics follow the conserving XY limit.
#[test]
fn strong_field_tracks_conserving_populations() {
    let n = 10;
    let ising = Propagator::new(&chain(n, SpinModel::Ising, 22.0)).unwrap();
    let xy = Propagator::new(&chain(n, SpinModel::Xy, 22.0)).unwrap();
    let neel = QuenchState::neel(n);
    let reg = QubitRegister::bipartite(2, 2);
    let charge = ChargeOperator::excitation_number(2, 2);
    let block = [3, 4, 5, 6];
    let mut worst: f64 = 0.0;
    for i in 0..=40 {
        let t = i as f64 * 0.25;
        let rho_ising = quench::evolve(&ising, &neel, t).unwrap().reduced(&block).unwrap();
        let rho_xy = quench::evolve(&xy, &neel, t).unwrap().reduced(&block).unwrap();
        let p_ising = oe_exact::populations(&oe_exact::sector_projected_schmidt(&rho_ising, &reg, &charge).unwrap()).unwrap();
        let p_xy = oe_exact::populations(&oe_exact::symmetry_resolved_schmidt(&rho_xy, &reg, &charge).unwrap()).unwrap();
        for q in p_xy.iter().chain(p_ising.iter()).map(|(q, _)| q) {
            worst = worst.max((p_ising.get(q) - p_xy.get(q)).abs());
        }
    }
    assert!(worst <= 2e-2, "largest population drift {worst:.3e}");
}
