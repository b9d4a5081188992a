//! Per-replication random substreams.
//!
//! Replication `i` of a run with master seed `m` draws from a ChaCha8 generator
//! whose 256-bit key is expanded from `splitmix64(m)` and whose stream id is `i`.
//! ChaCha streams with distinct ids under one key never overlap, and the stream for
//! `(m, i)` does not depend on how replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator type used for every replication.
pub type SubstreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for replication `index` under `master_seed`.
pub fn substream(master_seed: u64, index: u64) -> SubstreamRng {
    let mut key = [0u8; 32];
    let mut state = master_seed;
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
