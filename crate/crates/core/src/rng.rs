//! Seeded randomness.
//!
//! One root seed fans out to independent named streams. Every stream is a
//! ChaCha8 generator keyed by the root seed (via `seed_from_u64`) with the
//! ChaCha stream id set to the stream's fixed number below, so each component
//! can be re-seeded or replayed on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named randomness consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// True environment sampling observations and rewards.
    Env,
    /// Programmatic mentor sampling its actions.
    Mentor,
    /// Agent's posterior sampling and Monte Carlo rollouts.
    Agent,
    /// Agent's deferral noise.
    ZNoise,
}

impl Stream {
    pub const fn id(self) -> u64 {
        match self {
            Stream::Env => 1,
            Stream::Mentor => 2,
            Stream::Agent => 3,
            Stream::ZNoise => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    root: u64,
}

impl RngStreams {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn stream(&self, stream: Stream) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(stream.id());
        rng
    }
}
