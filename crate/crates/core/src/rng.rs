//! Seeded, order-independent random substreams.
//!
//! A stream is identified by a 64-bit seed plus a `(purpose, round, split)`
//! triple. Each component is passed through a bijective 64-bit mixer and the
//! four words form the 256-bit ChaCha key, so distinct identifiers never share
//! a key and any substream can be regenerated without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a substream is used for. Keeps keys of unrelated jobs apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u64)]
pub enum Purpose {
    Samples = 1,
    Latent = 2,
    LatentMixture = 3,
    Split = 4,
    Conditional = 5,
    Train = 6,
    Series = 7,
    Pooled = 8,
    User = 100,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub purpose: u64,
    pub round: u64,
    pub split: u64,
}

impl StreamId {
    pub fn new(purpose: Purpose, round: u64, split: u64) -> Self {
        Self {
            purpose: purpose as u64,
            round,
            split,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: StreamId,
}

// splitmix64 finalizer; a bijection on u64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, purpose: Purpose, round: u64, split: u64) -> Self {
        Self {
            seed,
            stream: StreamId::new(purpose, round, split),
        }
    }

    /// Root stream for a run.
    pub fn root(seed: u64) -> Self {
        Self::new(seed, Purpose::User, 0, 0)
    }

    /// Derives a child stream. The child's seed folds in the parent's full
    /// identity, so children of different parents never coincide.
    pub fn derive(&self, purpose: Purpose, round: u64, split: u64) -> Self {
        let parent =
            mix(self.seed
                ^ mix(self.stream.purpose ^ mix(self.stream.round ^ mix(self.stream.split))));
        Self::new(parent, purpose, round, split)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let words = [
            mix(self.seed),
            mix(self.stream.purpose ^ 0x5851_F42D_4C95_7F2D),
            mix(self.stream.round ^ 0x1405_7B7E_F767_814F),
            mix(self.stream.split ^ 0x2545_F491_4F6C_DD1D),
        ];
        let mut key = [0u8; 32];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
