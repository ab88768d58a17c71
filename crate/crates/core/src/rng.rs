//! Seeded random streams.
//!
//! Every stochastic operation takes a `u64` seed. Independent sub-streams
//! (one per event, per chain, per prediction target) are derived from a
//! root seed with [`derive_seed`], so the value drawn for a given stream does
//! not depend on the order in which streams are consumed. The generator is
//! ChaCha8, which additionally exposes 2^64 streams per key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed, a purpose tag and an index.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    for b in tag.bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for sub-stream `index` of purpose `tag` under `seed`.
pub fn stream(seed: u64, tag: &str, index: u64) -> StreamRng {
    rng_from_seed(derive_seed(seed, tag, index))
}
