//! Seeded RNG streams derived from a root seed and a path of labels, so each
//! (dataset, instance) or (model, tree) draws from its own independent
//! stream regardless of evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// One component of a stream label.
pub enum Part<'a> {
    Str(&'a str),
    U64(u64),
}

impl<'a> From<&'a str> for Part<'a> {
    fn from(s: &'a str) -> Self {
        Part::Str(s)
    }
}

impl From<u64> for Part<'_> {
    fn from(v: u64) -> Self {
        Part::U64(v)
    }
}

impl From<usize> for Part<'_> {
    fn from(v: usize) -> Self {
        Part::U64(v as u64)
    }
}

pub fn stream(seed: u64, parts: &[Part<'_>]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        match p {
            // length-prefix strings so ("ab","c") and ("a","bc") differ
            Part::Str(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Part::U64(v) => {
                h.update([1u8]);
                h.update(v.to_le_bytes());
            }
        }
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}
