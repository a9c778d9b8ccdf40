//! Seed derivation. Every stochastic component draws from its own ChaCha
//! stream keyed by `(seed, stream ids…)`, so results do not depend on the
//! order in which independent work items run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, streams: &[u64]) -> u64 {
    streams
        .iter()
        .fold(splitmix64(seed), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

pub fn stream(seed: u64, streams: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, streams))
}
