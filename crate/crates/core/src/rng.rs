//! Random stream derivation.
//!
//! Every run draws from two ChaCha8 streams keyed by a 64-bit seed: one for
//! treatment assignment (policy randomness) and one for the environment's
//! outcome draws. Replication `r` of a sweep with master seed `S` uses key `S`
//! and stream ids `2r` (assignment) and `2r + 1` (environment); a single run
//! started with `run_experiment(config, seed)` is replication 0 of `seed`.
//! ChaCha streams with distinct ids share no state, so replications are
//! independent of each other and of the order in which they execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The RNG type used throughout the engine.
pub type StreamRng = ChaCha8Rng;

/// Identifies the pair of streams a run draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunStreams {
    pub key: u64,
    pub replication: u64,
}

impl RunStreams {
    pub fn new(key: u64, replication: u64) -> Self {
        Self { key, replication }
    }

    /// Streams for a standalone run.
    pub fn single(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn assignment(&self) -> StreamRng {
        stream(self.key, 2 * self.replication)
    }

    pub fn environment(&self) -> StreamRng {
        stream(self.key, 2 * self.replication + 1)
    }
}

/// ChaCha8 keyed by `key`, positioned at the start of stream `id`.
pub fn stream(key: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(id);
    rng
}
