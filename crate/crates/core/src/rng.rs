//! Reproducible random-number streams.
//!
//! Every stochastic routine in this crate draws from a [`ChaCha8Rng`] stream
//! derived from a master seed, a domain tag, and integer stream ids. Streams
//! with different (domain, ids) are statistically independent, and a given
//! tuple always yields the same stream regardless of platform or of how many
//! other streams were consumed — which is what makes parallel Monte Carlo
//! loops (keyed per replicate) bit-identical to their serial counterparts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A master seed from which named sub-streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    /// Wrap a master seed.
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// The wrapped master seed.
    pub fn master(&self) -> u64 {
        self.master
    }

    /// Derive the stream identified by a domain tag and integer ids.
    ///
    /// The 256-bit ChaCha seed is produced by running a splitmix64 chain over
    /// the master seed, an FNV-1a hash of the domain tag, and each id in turn.
    pub fn stream(&self, domain: &str, ids: &[u64]) -> ChaCha8Rng {
        let mut state = self.master ^ 0x9e37_79b9_7f4a_7c15;
        state = splitmix64(state ^ fnv1a(domain.as_bytes()));
        for &id in ids {
            state = splitmix64(state ^ id.wrapping_mul(0xff51_afd7_ed55_8ccd));
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
