//! Reproducible per-replication random streams.
//!
//! ChaCha is a counter-based generator: the 64-bit seed keys the cipher and
//! the replication index selects an independent stream, so `(seed, index)`
//! maps to the same sequence on every platform and under any scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for replication `index` of an experiment seeded with `seed`.
pub fn rng_stream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
