//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and a
//! 64-bit stream id mixed from a purpose tag and an index. A replicate's
//! stream therefore depends only on `(seed, purpose, index)` and never on
//! how many other replicates exist or which worker thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Stream for replicate `index` of the task named `purpose`.
pub fn stream(seed: u64, purpose: &str, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    rng.set_stream(splitmix64(fnv1a(purpose) ^ splitmix64(index)));
    rng
}

/// Single stream for one-off tasks.
pub fn seeded(seed: u64) -> SimRng {
    stream(seed, "default", 0)
}
