//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use shadowbench::{ComplexMatrix, ComplexVector};

/// Many-body Hamiltonian `-1/2 Σ_i (c_i† c_{i+1} + h.c.)` on a periodic chain of
/// `n` sites in the Jordan–Wigner basis (`|1>` occupied, site 0 most significant).
pub fn jw_hopping_hamiltonian(n: usize) -> DMatrix<f64> {
    let d = 1usize << n;
    let bit = |i: usize| 1usize << (n - 1 - i);
    // Parity of the occupied sites strictly before `i`.
    let sign_before = |x: usize, i: usize| -> f64 {
        let mask = !((1usize << (n - i)) - 1) & (d - 1);
        if (x & mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 }
    };
    let mut h = DMatrix::zeros(d, d);
    let mut bonds: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    if n == 2 {
        bonds.truncate(2);
    }
    for x in 0..d {
        for &(a, b) in &bonds {
            for (i, j) in [(a, b), (b, a)] {
                // c_i† c_j |x>.
                if x & bit(j) == 0 || (x & bit(i) != 0 && i != j) {
                    continue;
                }
                let s1 = sign_before(x, j);
                let y = x & !bit(j);
                let s2 = sign_before(y, i);
                let z = y | bit(i);
                h[(z, x)] += -0.5 * s1 * s2;
            }
        }
    }
    h
}

/// Reduced state on the first `ell` sites at time `t` after a quench from the
/// Néel state `|0101…>`. Evolves inside the half-filled sector only.
pub fn jw_quench_reduced(n: usize, ell: usize, t: f64) -> ComplexMatrix {
    let h = jw_hopping_hamiltonian(n);
    let sector: Vec<usize> = (0..1usize << n).filter(|x| x.count_ones() as usize == n / 2).collect();
    let hs = DMatrix::from_fn(sector.len(), sector.len(), |a, b| h[(sector[a], sector[b])]);
    let eig = hs.symmetric_eigen();
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let neel = (0..n).fold(0usize, |acc, q| (acc << 1) | (q % 2));
    let mut psi0 = ComplexVector::zeros(sector.len());
    psi0[sector.iter().position(|&x| x == neel).unwrap()] = Complex64::new(1.0, 0.0);
    let mut c = v.ad_mul(&psi0);
    for (ci, e) in c.iter_mut().zip(eig.eigenvalues.iter()) {
        *ci *= Complex64::from_polar(1.0, -e * t);
    }
    let local = &v * c;
    let mut psi = ComplexVector::zeros(1 << n);
    for (a, &x) in sector.iter().enumerate() {
        psi[x] = local[a];
    }
    let rest = 1usize << (n - ell);
    let amps = ComplexMatrix::from_fn(1 << ell, rest, |i, e| psi[i * rest + e]);
    &amps * amps.adjoint()
}

/// Number of ordered tuples of `len` distinct indices below `n`.
pub fn falling(n: usize, len: usize) -> f64 {
    (0..len).map(|i| (n - i) as f64).product()
}
