//! Named random sub-streams.
//!
//! Every stochastic component draws from a stream derived from the global
//! seed plus a component name and a list of indices (epoch, document id,
//! restart, ...). Draws therefore never depend on scheduling or on how many
//! other components consumed randomness before.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// One component of a stream path.
#[derive(Debug, Clone, Copy)]
pub enum Key<'a> {
    Index(u64),
    Name(&'a str),
}

impl From<u64> for Key<'_> {
    fn from(v: u64) -> Self {
        Key::Index(v)
    }
}

impl From<usize> for Key<'_> {
    fn from(v: usize) -> Self {
        Key::Index(v as u64)
    }
}

impl<'a> From<&'a str> for Key<'a> {
    fn from(v: &'a str) -> Self {
        Key::Name(v)
    }
}

/// Derive a 64-bit seed from `(seed, component, path...)`.
pub fn derive_seed(seed: u64, component: &str, path: &[Key<'_>]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((component.len() as u64).to_le_bytes());
    h.update(component.as_bytes());
    for key in path {
        match key {
            Key::Index(i) => {
                h.update([0u8]);
                h.update(i.to_le_bytes());
            }
            Key::Name(s) => {
                h.update([1u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
        }
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(seed: u64, component: &str, path: &[Key<'_>]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, component, path))
}
