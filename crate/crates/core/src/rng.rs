//! Reproducible random streams.
//!
//! Every worker gets its own ChaCha8 generator keyed by the master seed and
//! selected by a stream index, so ensemble results do not depend on how paths
//! are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
