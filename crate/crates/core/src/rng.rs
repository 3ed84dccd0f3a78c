//! Counter-keyed random streams.
//!
//! A stream is identified by a root seed and a path of indices, e.g.
//! `(seed, [repetition, unitary])`. Streams never depend on the order in which
//! they are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, path)`. The last path element selects the
/// ChaCha stream; the others are folded into the key.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let (key_path, last) = match path.split_last() {
        Some((last, rest)) => (rest, *last),
        None => (&[][..], 0),
    };
    let key = key_path
        .iter()
        .fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p.wrapping_add(0xA5A5))));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(last);
    rng
}

/// Generator for record (unitary) `index` of a dataset.
pub fn record_stream(seed: u64, index: u64) -> ChaCha8Rng {
    stream(seed, &[index])
}
