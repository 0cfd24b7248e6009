//! Reproducible random streams.
//!
//! A stream is identified by a (seed, stream_id) pair and expanded into a
//! ChaCha8 generator through a SplitMix64 chain, so replicas derive
//! statistically independent substreams from their index alone, with no
//! coordination between workers. The generator choice is fixed here and
//! nowhere else.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifier of a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Substream for replica `index`; injective in (stream_id, index)
    /// up to the mixing quality of SplitMix64.
    pub fn substream(&self, index: u64) -> Self {
        let mut state = self.stream_id;
        let mixed = splitmix64(&mut state);
        let mut state = mixed ^ index;
        Self {
            seed: self.seed,
            stream_id: splitmix64(&mut state),
        }
    }

    /// Instantiate the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed ^ 0x6a09_e667_f3bc_c908;
        let mut key = [0u8; 32];
        let mut words = [0u64; 4];
        words[0] = splitmix64(&mut state);
        state ^= self.stream_id;
        words[1] = splitmix64(&mut state);
        words[2] = splitmix64(&mut state);
        words[3] = splitmix64(&mut state);
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Unit exponential by inverse CDF from the open interval (0, 1);
/// never returns infinity.
pub fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(rand::distr::Open01);
    -u.ln()
}
