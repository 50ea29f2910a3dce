//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha`), which is
//! portable and fully specified, so a seed produces the same bits on every
//! platform. Independent substreams share the seed-derived key and differ in
//! the ChaCha stream id; row `i` of a generated matrix always reads stream
//! `i + 1`, which makes blockwise or parallel generation reproduce the
//! sequential result exactly. Stream 0 is the "main" stream of a component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Main stream for `seed`.
pub fn main_stream(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Substream `index + 1` for `seed`; used for per-row generation.
pub fn row_stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Derives an unrelated seed for a named sub-task (e.g. the sketch of a run
/// versus its initialization), so the two never share a key.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
