//! Reference states and random-state generators.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linop::{kron, projector, ComplexMatrix, ComplexVector, ONE};

fn normalize_trace(mut m: ComplexMatrix) -> ComplexMatrix {
    let tr: Complex64 = m.diagonal().iter().sum();
    m /= tr;
    m
}

pub fn basis_vector(n_qubits: usize, index: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(1 << n_qubits);
    v[index] = ONE;
    v
}

/// `(|0…0> + |1…1>)/√2`.
pub fn ghz(n_qubits: usize) -> ComplexMatrix {
    let mut v = ComplexVector::zeros(1 << n_qubits);
    let s = Complex64::new(0.5f64.sqrt(), 0.0);
    v[0] = s;
    v[(1 << n_qubits) - 1] = s;
    projector(&v)
}

/// `(|00> + |11>)/√2`.
pub fn bell() -> ComplexMatrix {
    ghz(2)
}

pub fn maximally_mixed(n_qubits: usize) -> ComplexMatrix {
    let d = 1 << n_qubits;
    ComplexMatrix::identity(d, d) / Complex64::new(d as f64, 0.0)
}

/// `w |Bell><Bell| + (1 - w) I/4`.
pub fn werner(w: f64) -> ComplexMatrix {
    bell() * Complex64::new(w, 0.0) + maximally_mixed(2) * Complex64::new(1.0 - w, 0.0)
}

/// Alternating `|0101…>` with qubit 0 in `|0>`.
pub fn neel_index(n_qubits: usize) -> usize {
    (0..n_qubits).fold(0, |acc, q| (acc << 1) | (q % 2))
}

pub fn neel(n_qubits: usize) -> ComplexVector {
    basis_vector(n_qubits, neel_index(n_qubits))
}

/// `a|100> + b|010> + c|001>`, a single excitation shared by three qubits.
pub fn single_excitation_triplet(a: Complex64, b: Complex64, c: Complex64) -> ComplexVector {
    let mut v = ComplexVector::zeros(8);
    v[0b100] = a;
    v[0b010] = b;
    v[0b001] = c;
    v
}

pub fn product(factors: &[ComplexMatrix]) -> ComplexMatrix {
    factors
        .iter()
        .fold(ComplexMatrix::identity(1, 1), |acc, f| kron(&acc, f))
}

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix with i.i.d. standard complex normal entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Random density matrix of the given rank (induced measure).
pub fn random_density(n_qubits: usize, rank: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(1 << n_qubits, rank.max(1), rng);
    normalize_trace(&g * g.adjoint())
}

pub fn random_pure(n_qubits: usize, rng: &mut impl Rng) -> ComplexVector {
    let v = ComplexVector::from_fn(1 << n_qubits, |_, _| gaussian(rng));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Random density matrix that is block diagonal with respect to the integer-valued
/// diagonal `charges` (one entry per basis state).
pub fn random_block_diagonal(charges: &[f64], rng: &mut impl Rng) -> ComplexMatrix {
    let d = charges.len();
    let mut levels: Vec<i64> = charges.iter().map(|q| q.round() as i64).collect();
    levels.sort_unstable();
    levels.dedup();
    let mut m = ComplexMatrix::zeros(d, d);
    for level in levels {
        let idx: Vec<usize> = (0..d).filter(|&i| charges[i].round() as i64 == level).collect();
        let k = idx.len();
        let rank = rng.gen_range(1..=k);
        let weight = rng.gen_range(0.05..1.0);
        let g = ginibre(k, rank, rng);
        let block = &g * g.adjoint() * Complex64::new(weight, 0.0);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = block[(a, b)];
            }
        }
    }
    normalize_trace(m)
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn haar_unitary(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = ComplexVector::from_fn(dim, |i, _| {
        let d = r[(i, i)];
        if d.norm() == 0.0 {
            ONE
        } else {
            d / d.norm()
        }
    });
    let mut u = q;
    for (j, mut col) in u.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    u
}

/// `|psi><psi|` for a pure state on the given qubits, returned as a density matrix.
pub fn pure(psi: &ComplexVector) -> ComplexMatrix {
    projector(psi)
}
