//! Per-agent random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the scenario seed and
//! selected by a stream number, so draws for one agent never depend on how
//! many draws another agent made or on iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const INIT_STREAM: u64 = u64::MAX;

/// Stream owned by agent `id`.
pub fn agent_stream(seed: u64, id: usize) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

/// Stream used to draw initial states.
pub fn init_stream(seed: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    rng
}
