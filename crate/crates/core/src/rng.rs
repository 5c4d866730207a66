//! Reproducible random streams.
//!
//! Every random draw in the crate goes through a [`SimRng`], a ChaCha8 stream
//! cipher keyed by the master seed. Independent streams are addressed by a
//! path of indices (trial, SNR point, purpose) that is hashed into the ChaCha
//! stream id, so any stream can be regenerated without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream purposes used by the experiment harness.
pub mod purpose {
    pub const CHANNEL: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const ANALYSIS: u64 = 3;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Root stream for a master seed.
pub fn master_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Stream addressed by `path` under `seed`. Distinct paths give independent
/// streams; the same `(seed, path)` always gives the same stream.
pub fn derive_rng(seed: u64, path: &[u64]) -> SimRng {
    let stream = path.iter().fold(splitmix64(path.len() as u64), |acc, &p| splitmix64(acc ^ splitmix64(p)));
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
