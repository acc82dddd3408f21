//! Seeded substream derivation for reproducible parallel Monte Carlo.
//!
//! Every stochastic operation in this crate owns a private RNG derived from a
//! master seed, a domain tag, and a key tuple (e.g. pass index, layer, head,
//! row). Streams are independent of scheduling order, so parallel and serial
//! execution produce identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep substreams from distinct subsystems disjoint even when
/// their key tuples collide.
pub mod domain {
    pub const ENCODER_INIT: u64 = 1;
    pub const PATCH_EMBED: u64 = 2;
    pub const ATTENTION_ROW: u64 = 3;
    pub const DATA: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const EVAL_LOSS: u64 = 6;
    pub const BO_SUGGEST: u64 = 7;
    pub const DROPOUT: u64 = 8;
    pub const SWAG_SGD: u64 = 9;
    pub const SWAG_SAMPLE: u64 = 10;
    pub const BOOTSTRAP: u64 = 11;
    pub const REPORT: u64 = 12;
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function; full-period mixer over u64.
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapse `(master_seed, domain, key...)` into a single well-mixed u64.
pub fn mix_key(master_seed: u64, domain: u64, key: &[u64]) -> u64 {
    let mut state = master_seed;
    let mut acc = splitmix64(&mut state);
    state ^= domain.wrapping_mul(GOLDEN_GAMMA);
    acc ^= splitmix64(&mut state);
    for &k in key {
        state ^= k.wrapping_mul(GOLDEN_GAMMA);
        acc = acc.rotate_left(23) ^ splitmix64(&mut state);
    }
    acc
}

/// Derive an owned RNG for the substream identified by
/// `(master_seed, domain, key)`.
pub fn substream(master_seed: u64, domain: u64, key: &[u64]) -> ChaCha8Rng {
    let mut state = mix_key(master_seed, domain, key);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
