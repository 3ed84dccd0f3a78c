mod common;

use shadowbench::ffchain::{self, ChainQuench, ChainSpec};
use shadowbench::oe_exact::{self, ChargeOperator};
use shadowbench::QubitRegister;

#[test]
fn lattice_sroe_matches_many_body_state() {
    let n = 10;
    for (ell_a, ell_b) in [(1, 1), (2, 2), (3, 3), (2, 4)] {
        let quench = ChainQuench::new(&ChainSpec::new(n, ell_a, ell_b).unwrap()).unwrap();
        let reg = QubitRegister::bipartite(ell_a, ell_b);
        let charge = ChargeOperator::excitation_number(ell_a, ell_b);
        for t in [0.0, 0.4, 1.3, 2.9] {
            let rho = common::jw_quench_reduced(n, ell_a + ell_b, t);
            let spec = oe_exact::symmetry_resolved_schmidt(&rho, &reg, &charge).unwrap();
            let xi = quench.super_correlations(t).unwrap().xi;
            for alpha in [1.0, 2.0] {
                let total = oe_exact::oe_renyi(&spec, alpha).unwrap();
                assert!((ffchain::total_oe(&xi, alpha) - total).abs() < 1e-7, "total ℓ=({ell_a},{ell_b}) t={t} α={alpha}");
                let pops = oe_exact::populations(&spec).unwrap();
                for (q, p) in pops.iter() {
                    let p_ff = ffchain::populations_ff(&xi, ell_a)[&q];
                    assert!((p - p_ff).abs() < 1e-9, "p({q}) ℓ=({ell_a},{ell_b}) t={t}: {p} vs {p_ff}");
                    if p < 1e-10 {
                        continue;
                    }
                    let exact = oe_exact::sroe(&spec, q, alpha).unwrap();
                    let ff = ffchain::sroe_ff(&xi, ell_a, alpha, q).unwrap();
                    assert!((exact - ff).abs() < 1e-7, "S_{q} ℓ=({ell_a},{ell_b}) t={t} α={alpha}: {exact} vs {ff}");
                }
            }
        }
    }
}
