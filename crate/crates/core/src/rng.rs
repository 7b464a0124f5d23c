//! Reproducible random streams.
//!
//! Every random quantity is drawn from a [`ChaCha8Rng`] keyed by a master
//! seed. A stream is addressed by `(replicate index, lane)`: the master seed
//! is expanded into the 256-bit ChaCha key with `seed_from_u64`, and the
//! 64-bit ChaCha stream id is `index << 4 | lane`. Distinct addresses give
//! non-overlapping keystreams, so replicates never share random numbers and
//! any single replicate can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator type handed to every sampling routine.
pub type Stream = ChaCha8Rng;

/// Purpose of a stream within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Lane {
    Data = 0,
    Weights = 1,
    Pilot = 2,
    Aux = 3,
}

/// Derives independent streams from a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFactory {
    master_seed: u64,
}

impl StreamFactory {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Stream for replicate `index` and purpose `lane`.
    ///
    /// Panics if `index` does not fit in 60 bits.
    pub fn stream(&self, index: u64, lane: Lane) -> Stream {
        assert!(index < (1u64 << 60), "replicate index out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((index << 4) | lane as u64);
        rng
    }
}
