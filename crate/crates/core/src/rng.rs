//! Seeded RNG streams.
//!
//! Every independent task (restart, trial, row block, repetition) gets its own
//! ChaCha stream keyed by `(seed, stream)`, so results never depend on how
//! rayon schedules the work.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// RNG for task `stream` under master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a two-level task key into a single stream id.
pub fn stream_id(major: u64, minor: u64) -> u64 {
    major.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ minor.wrapping_add(0x632B_E59B_D9B4_E019)
}
