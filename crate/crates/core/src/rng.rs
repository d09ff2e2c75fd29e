//! Seeded random number generation shared by every stochastic component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Platform-independent generator used for shuffles, initializations and Gibbs sweeps.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream from a base seed and a stream tag.
pub fn derived(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
