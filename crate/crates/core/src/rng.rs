//! Deterministic sub-streams derived from one experiment seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of stream labels into one 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stream labels, so unrelated uses of the same seed never collide.
pub(crate) mod tag {
    pub const INIT: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const LOCAL_TRAIN: u64 = 3;
    pub const EDGE_TRAIN: u64 = 4;
    pub const POPULATION: u64 = 5;
    pub const DATA: u64 = 6;
    pub const TEST_DATA: u64 = 7;
    pub const SHUFFLE: u64 = 8;
}
