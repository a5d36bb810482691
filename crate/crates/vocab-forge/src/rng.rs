//! Deterministic seeding helpers.
//!
//! Everything random in this crate flows through two constructions:
//! a labelled seed derivation (one top-level seed fans out to per-stage
//! seeds) and a per-token keyed RNG, so row generation is reproducible
//! regardless of scheduling or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a stage seed from a top-level seed and a label.
///
/// The label is folded byte-wise so distinct stage names give independent
/// streams while `derive_seed(s, l)` stays stable across runs and platforms.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = splitmix64(root ^ 0x5bf0_3635_16f5_33cc);
    for &b in label.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

/// RNG keyed on `(seed, token_id)`.
///
/// Each token gets its own counter-mode stream, so a matrix can be filled
/// row-by-row in any order (or in parallel) and come out bit-identical.
pub fn token_rng(seed: u64, token_id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&token_id.to_le_bytes());
    key[16..24].copy_from_slice(&splitmix64(seed ^ token_id.rotate_left(17)).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Plain stream RNG for a stage (sampling, shuffling).
pub fn stream_rng(seed: u64) -> ChaCha8Rng {
    token_rng(seed, u64::MAX)
}
