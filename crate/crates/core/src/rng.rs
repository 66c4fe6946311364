//! Seedable, splittable random streams.
//!
//! Every stochastic subsystem draws from its own ChaCha stream keyed by the
//! master seed, so results do not depend on the order in which subsystems
//! (or parallel workers) consume randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    UserDrop,
    RandomAssociation,
    /// Fading realization `k` of a scenario.
    Fading(u32),
    /// Free-form streams for tests and fuzzing.
    Aux(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::UserDrop => 1,
            Stream::RandomAssociation => 2,
            Stream::Fading(k) => (1 << 32) | u64::from(k),
            Stream::Aux(k) => (2 << 32) | u64::from(k),
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
