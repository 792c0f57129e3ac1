//! Seeded, splittable RNG streams.
//!
//! Every random decision in the crate draws from an `RngStream` keyed
//! by `(seed, stream_id)`. Child streams are derived from labels, not
//! by consuming parent state, so the draw sequence of a stream never
//! depends on scheduling or on what other streams did. This is what
//! makes parallel client updates reproducible.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    /// Stream for an explicit `(seed, stream_id)` pair.
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&stream_id.to_le_bytes());
        // Distinct tail so (0, 0) is not the all-zero ChaCha key.
        key[16..24].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
        key[24..32].copy_from_slice(&(seed ^ stream_id.rotate_left(32)).to_le_bytes());
        RngStream {
            seed,
            stream_id,
            rng: ChaCha12Rng::from_seed(key),
        }
    }

    /// Root stream of a run.
    pub fn root(seed: u64) -> Self {
        RngStream::new(seed, 0)
    }

    /// Child stream labeled by a stage tag and integer ids (round,
    /// client id, ...). Derivation is pure: it reads only the parent's
    /// identity, never its position, so any two derivations of the same
    /// label agree no matter when they happen.
    pub fn derive(&self, tag: &str, ids: &[u64]) -> RngStream {
        RngStream::new(self.seed, stream_hash(self.stream_id, tag, ids))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// FNV-1a over (parent stream id, tag, ids). Hand-rolled so the value
/// is stable across platforms and toolchain versions.
fn stream_hash(parent: u64, tag: &str, ids: &[u64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(&parent.to_le_bytes());
    eat(tag.as_bytes());
    for id in ids {
        eat(&id.to_le_bytes());
    }
    h
}
