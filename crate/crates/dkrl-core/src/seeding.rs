//! Single splittable source of randomness. Every stochastic routine takes a
//! `u64` seed and derives an independent ChaCha stream from it, so results
//! are reproducible across platforms and thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels keep sub-generators independent without seed arithmetic.
pub mod streams {
    pub const DESIGN_Z: u64 = 1;
    pub const DESIGN_X: u64 = 2;
    pub const THETA: u64 = 3;
    pub const SAMPLE_INDICES: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const INIT_U: u64 = 6;
    pub const INIT_V: u64 = 7;
    pub const NYSTROM: u64 = 8;
    pub const FOLDS: u64 = 9;
    pub const BANDIT: u64 = 10;
    pub const SPLIT: u64 = 11;
}

/// Root generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-generator: same seed, distinct stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Seeded permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, stream));
    order
}
