//! Counter-based random streams.
//!
//! A stream is a ChaCha8 keystream selected by `(seed, domain)` for the key
//! and `(major, minor)` for the 64-bit stream id, e.g. `(sphere, chunk)`.
//! Any partition of the work across threads reads the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_SIGMA: u64 = 1;
pub const DOMAIN_CONE: u64 = 2;
pub const DOMAIN_TRIAL: u64 = 3;
pub const DOMAIN_CHECK: u64 = 4;
pub const DOMAIN_CATALOG: u64 = 5;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a seed with a tag into a new, well-separated seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

pub fn stream(seed: u64, domain: u64, major: u32, minor: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = derive_seed(seed, domain);
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((major as u64) << 32) | minor as u64);
    rng
}
