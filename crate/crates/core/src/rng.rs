//! Seed derivation for reproducible parallel streams.
//!
//! Every random stream is a `ChaCha8Rng` keyed by a sub-seed derived from
//! `(master seed, label)` and positioned on stream `index`. Replica `r` never
//! depends on how many replicas ran before it or on which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a label into a sub-seed of `master`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(master ^ splitmix64(h))
}

/// Stream `index` of the generator keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream `index` of the generator keyed by `(master, label)`.
pub fn labeled_stream(master: u64, label: &str, index: u64) -> StreamRng {
    stream(derive_seed(master, label), index)
}
