//! Sequential against rayon-parallel execution of the hot loops.
//!
//! With the `parallel` feature disabled both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowbench::ffchain::{self, ChainSpec};
use shadowbench::quench::QuenchState;
use shadowbench::shadows::{self, BatchOrder, BatchedShadows, Ensemble};
use shadowbench::{linop, states, ComplexMatrix, Execution};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn ghz_records(n_u: usize) -> Vec<shadows::MeasurementRecord> {
    let state = QuenchState::from_density(states::ghz(4)).unwrap();
    shadows::randomized_measurements(&state, Ensemble::Haar, n_u, 10, 7, Execution::Parallel).unwrap()
}

fn measurement(c: &mut Criterion) {
    let state = QuenchState::from_density(states::ghz(6)).unwrap();
    let mut group = c.benchmark_group("randomized_measurements");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| shadows::randomized_measurements(&state, Ensemble::Pauli, 200, 50, 3, exec).unwrap())
        });
    }
    group.finish();
}

fn shadow_construction(c: &mut Criterion) {
    let records = ghz_records(200);
    let mut group = c.benchmark_group("unitary_shadows");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| shadows::unitary_shadows(&records, &[0, 1, 2, 3], exec).unwrap()));
    }
    group.finish();
}

fn fourth_moment(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("quad_mean");
    group.sample_size(10);
    for n_prime in [16, 32] {
        let rs: Vec<ComplexMatrix> = (0..n_prime)
            .map(|_| linop::realign(&states::random_density(4, 16, &mut rng), 4, 4).unwrap())
            .collect();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n_prime), &rs, |b, rs| b.iter(|| shadows::quad_mean(rs, exec)));
        }
    }
    group.finish();
}

fn renyi2_with_jackknife(c: &mut Criterion) {
    let records = ghz_records(160);
    let mut group = c.benchmark_group("estimate_renyi2_oe");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let set = BatchedShadows::from_records(&records, &[0, 1], &[2, 3], 16, BatchOrder::Contiguous).unwrap().with_execution(exec);
        group.bench_function(name, |b| b.iter(|| shadows::estimate_renyi2_oe(&set).unwrap()));
    }
    group.finish();
}

fn chain_sweep(c: &mut Criterion) {
    let spec = ChainSpec::new(256, 40, 40).unwrap();
    let times: Vec<f64> = (0..16).map(|i| 4.0 * i as f64).collect();
    let mut group = c.benchmark_group("lattice_sweep");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| ffchain::lattice_sweep(&spec, &times, 1.0, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, measurement, shadow_construction, fourth_moment, renyi2_with_jackknife, chain_sweep);
criterion_main!(benches);
