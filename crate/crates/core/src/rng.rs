//! Seeded random substreams.
//!
//! Every run is driven by a single 64-bit seed. Source, channel and
//! controller randomness come from separate ChaCha streams keyed by that
//! seed, so two controllers simulated with the same seed see identical
//! source and channel realizations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random substream of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    Source,
    Channel,
    Controller,
}

impl Substream {
    fn id(self) -> u64 {
        match self {
            Substream::Source => 1,
            Substream::Channel => 2,
            Substream::Controller => 3,
        }
    }
}

pub type StreamRng = ChaCha8Rng;

/// Independent generator for `stream` under the run seed `seed`.
pub fn substream(seed: u64, stream: Substream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
