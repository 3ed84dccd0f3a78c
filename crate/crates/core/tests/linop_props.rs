use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowbench::linop::{self, SwapPair};
use shadowbench::{states, ComplexMatrix, QubitRegister};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_mixed_product(seed: u64, m in 1usize..4, n in 1usize..4, p in 1usize..4, q in 1usize..4, r in 1usize..4, s in 1usize..4) {
        let mut g = rng(seed);
        let a = states::ginibre(m, n, &mut g);
        let b = states::ginibre(p, q, &mut g);
        let c = states::ginibre(n, r, &mut g);
        let d = states::ginibre(q, s, &mut g);
        let lhs = linop::kron(&a, &b) * linop::kron(&c, &d);
        let rhs = linop::kron(&(&a * &c), &(&b * &d));
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn partial_trace_preserves_trace_and_positivity(seed: u64, n in 1usize..5, rank in 1usize..5, mask in 1u32..16) {
        let rho = states::random_density(n, rank, &mut rng(seed));
        let keep: Vec<usize> = (0..n).filter(|q| mask & (1 << q) != 0).collect();
        prop_assume!(!keep.is_empty());
        let reduced = linop::partial_trace_qubits(&rho, n, &keep).unwrap();
        prop_assert!((linop::trace(&reduced) - linop::trace(&rho)).norm() < 1e-12);
        prop_assert!(linop::hermitian_eigenvalues(&reduced).iter().all(|&e| e >= -1e-12));
    }

    #[test]
    fn two_copy_swaps_are_hermitian_involutions(n_a in 1usize..3, n_b in 1usize..3, swap_b: bool) {
        let reg = QubitRegister::bipartite(n_a, n_b);
        let mut pairs = vec![SwapPair::new("A", 0, 1)];
        if swap_b {
            pairs.push(SwapPair::new("B", 0, 1));
        }
        let u = linop::swap_operator(&reg, 2, &pairs).unwrap();
        let id = linop::identity(u.nrows());
        prop_assert!(max_abs(&(&u - u.adjoint())) < 1e-12);
        prop_assert!(max_abs(&(&u * &u - id)) < 1e-12);
    }

    #[test]
    fn eigendecomposition_reconstructs(seed: u64, dim in 1usize..9) {
        let g = states::ginibre(dim, dim, &mut rng(seed));
        let h = (&g + g.adjoint()).scale(0.5);
        let (values, vectors) = linop::hermitian_eigen(&h);
        let diag = ComplexMatrix::from_fn(dim, dim, |i, j| if i == j { values[i].into() } else { linop::ZERO });
        let back = &vectors * diag * vectors.adjoint();
        prop_assert!(linop::frobenius_norm(&(back - &h)) < 1e-10);
    }

    #[test]
    fn singular_values_are_sorted_and_nonnegative(seed: u64, rows in 1usize..9, cols in 1usize..9) {
        let sv = linop::singular_values(&states::ginibre(rows, cols, &mut rng(seed)));
        prop_assert_eq!(sv.len(), rows.min(cols));
        prop_assert!(sv.iter().all(|&s| s >= 0.0));
        prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn fourth_moment_swap_is_an_involution() {
    let reg = QubitRegister::bipartite(1, 1);
    let u = linop::swap_operator(&reg, 4, &linop::fourth_moment_pairs()).unwrap();
    assert!(max_abs(&(&u - u.adjoint())) < 1e-12);
    assert!(max_abs(&(&u * &u - linop::identity(u.nrows()))) < 1e-12);
}
