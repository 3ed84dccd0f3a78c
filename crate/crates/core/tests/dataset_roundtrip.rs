use std::io::Cursor;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowbench::dataset::{self, DatasetHeader};
use shadowbench::shadows::{Basis, Ensemble, MeasurementRecord};

/// `count` records with distinct `(r, m)` drawn from one seed.
fn records(seed: u64, ensemble: Ensemble, n_qubits: usize, n_m: usize, count: usize) -> Vec<MeasurementRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut basis = Basis::sample(ensemble, n_qubits, &mut rng);
    for i in 0..count {
        if i % n_m == 0 {
            basis = Basis::sample(ensemble, n_qubits, &mut rng);
        }
        out.push(MeasurementRecord {
            r: i / n_m + 1,
            m: i % n_m + 1,
            basis: basis.clone(),
            bits: (0..n_qubits).map(|_| rng.gen_range(0..2)).collect(),
        });
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn datasets_round_trip(seed: u64, haar: bool, n_qubits in 1usize..9, n_m in 1usize..6, tagged: bool) {
        let ensemble = if haar { Ensemble::Haar } else { Ensemble::Pauli };
        let recs = records(seed, ensemble, n_qubits, n_m, 1000);
        let mut header = DatasetHeader::new(n_qubits, ensemble, recs.len().div_ceil(n_m), n_m);
        if tagged {
            header.seed = Some(seed);
            header.metadata.insert("t".into(), serde_json::json!(0.1 + seed as f64 * 1e-20));
        }
        let mut buf = Vec::new();
        dataset::write_dataset(&mut buf, &header, &recs).unwrap();
        let (back_header, back) = dataset::read_dataset(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back_header, header);
        prop_assert_eq!(back, recs);
    }
}
