//! Seeded random number generation.
//!
//! Every stochastic operation in the crate takes an explicit generator so
//! that identical seeds reproduce identical results bit for bit. Batch
//! operations derive one independent substream per item from a base value
//! drawn off the caller's generator, keyed by item index; this keeps a
//! row's draws independent of how many rows precede it.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Prng = ChaCha8Rng;

/// Construct a generator from a seed.
pub fn seeded(seed: u64) -> Prng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent substream from `(base, index)`.
pub fn substream(base: u64, index: u64) -> Prng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}

/// Draw a base value for a family of per-item substreams.
pub fn substream_base(rng: &mut Prng) -> u64 {
    rng.next_u64()
}
