//! Stateless 64-bit mixing used for counter-based bit generation and for
//! deriving per-trial seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Bijective avalanche mixer (splitmix64 finalizer with the Stafford 13
/// constants).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `seed`. Distinct indices give unrelated
/// seeds; the map is a pure function so results do not depend on which
/// worker evaluates which index.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ 0xD1B5_4A32_D192_ED03).wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Hash of a coordinate tuple under a key.
#[inline]
pub fn hash_coords(key: u64, coords: &[i64]) -> u64 {
    let mut h = key;
    for (i, &c) in coords.iter().enumerate() {
        h = mix64(h.rotate_left(23) ^ (c as u64).wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
    }
    mix64(h ^ coords.len() as u64)
}

/// Fixed-point threshold for a probability at 53-bit resolution.
#[inline]
pub fn threshold53(p: f64) -> u64 {
    (p.clamp(0.0, 1.0) * (1u64 << 53) as f64).round() as u64
}

/// Uniform `u64 -> {0,1}` with success probability `threshold / 2^53`.
#[inline]
pub fn bernoulli53(hash: u64, threshold: u64) -> bool {
    (hash >> 11) < threshold
}

/// Sequential generator for audit sampling (random walks, test pairs).
pub fn audit_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
