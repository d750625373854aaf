//! Seed derivation and the named generator used for every random draw.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`. Independent streams are obtained by mixing
//! a master seed with a purpose tag and indices through SplitMix64, so a
//! trial's defective set and design never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bumped whenever any sampling procedure changes its output for a given seed.
pub const GENERATOR_ID: &str = "chacha8-splitmix64/v1";

pub type Generator = ChaCha8Rng;

/// Purpose tags for stream splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Defectives = 0x6465_6600,
    Design = 0x6465_7300,
    Auxiliary = 0x6175_7800,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream tag and a path of indices.
pub fn derive_seed(master: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ stream as u64);
    for &x in path {
        h = splitmix64(h ^ x);
    }
    h
}

pub fn generator(seed: u64) -> Generator {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on `[0, 1)` with 53 bits of resolution.
#[inline]
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1]` with 53 bits of resolution.
#[inline]
pub fn unit_f64_open0(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}
