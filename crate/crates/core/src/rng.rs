//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha stream selected by a
//! `(seed, stream)` key, so results do not depend on call order or on how
//! work is spread over threads.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the independent consumers of a seed.
pub mod stream {
    pub const SAMPLE: u64 = 1 << 40;
    pub const SOFM_INIT: u64 = 2 << 40;
    pub const SOFM_ORDER: u64 = 3 << 40;
    pub const MLP_INIT: u64 = 4 << 40;
    pub const MLP_ORDER: u64 = 5 << 40;
    pub const SWEEP: u64 = 6 << 40;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `k` distinct indices from `0..n`, sorted ascending.
pub fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut out = index::sample(rng, n, k).into_vec();
    out.sort_unstable();
    out
}
