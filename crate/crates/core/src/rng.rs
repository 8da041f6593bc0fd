//! Keyed random streams.
//!
//! Every random decision in the pipeline draws from a stream derived from the
//! master seed plus a tuple of stable keys (record id, epoch, identity, ...).
//! Streams never depend on scheduling order or array positions.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// One component of a stream key.
#[derive(Debug, Clone, Copy)]
pub enum StreamKey<'a> {
    Str(&'a str),
    Int(u64),
}

impl<'a> From<&'a str> for StreamKey<'a> {
    fn from(s: &'a str) -> Self {
        StreamKey::Str(s)
    }
}

impl From<u64> for StreamKey<'_> {
    fn from(v: u64) -> Self {
        StreamKey::Int(v)
    }
}

impl From<u32> for StreamKey<'_> {
    fn from(v: u32) -> Self {
        StreamKey::Int(u64::from(v))
    }
}

impl From<usize> for StreamKey<'_> {
    fn from(v: usize) -> Self {
        StreamKey::Int(v as u64)
    }
}

/// Derive a ChaCha8 stream from `seed` and an ordered list of keys.
///
/// Keys are length-prefixed and type-tagged before hashing so that
/// `("ab", "c")` and `("a", "bc")` produce different streams.
pub fn stream(seed: u64, keys: &[StreamKey<'_>]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"crossview-stream-v1");
    hasher.update(seed.to_le_bytes());
    for key in keys {
        match key {
            StreamKey::Str(s) => {
                hasher.update([0x01]);
                hasher.update((s.len() as u64).to_le_bytes());
                hasher.update(s.as_bytes());
            }
            StreamKey::Int(v) => {
                hasher.update([0x02]);
                hasher.update(v.to_le_bytes());
            }
        }
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}
