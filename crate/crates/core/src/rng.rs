//! Keyed random streams.
//!
//! Every random decision in the crate draws from a stream derived from the
//! run seed and a textual key (a word, a document id, a round number), so
//! results never depend on iteration order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit key from the seed and a sequence of key parts.
pub fn derive_key(seed: u64, parts: &[&str]) -> u64 {
    let mut hash = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    for part in parts {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        hash = fnv1a(hash, &(part.len() as u64).to_le_bytes());
        hash = fnv1a(hash, part.as_bytes());
    }
    mix(hash)
}

/// Returns an independent stream for `(seed, parts)`.
pub fn stream(seed: u64, parts: &[&str]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, parts))
}
