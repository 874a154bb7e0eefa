//! Seeded, splittable random streams.
//!
//! Every independent piece of randomness (a simulated dataset, an
//! initialization) gets its own [`ChaCha8Rng`] keyed by hashing the seed with
//! the identifying integers, so parallel execution never reorders draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a key tuple.
pub fn stream_key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |h, &x| splitmix64(h ^ splitmix64(x)))
}

pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(parts))
}

/// Tags separating the purposes a stream can serve.
pub mod tag {
    pub const DATA: u64 = 0x44415441;
    pub const INIT: u64 = 0x494E4954;
}
