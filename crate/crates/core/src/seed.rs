//! Counter-based seed derivation.
//!
//! Trial seeds are a pure function of `(base_seed, point_key, trial)`, and
//! every leaf draws from its own ChaCha stream selected by a hash of the leaf
//! name. Adding trials, grid points, or leaves never shifts existing draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream owned by a single leaf.
pub type LeafRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, stable across platforms and toolchains.
pub fn stable_hash(text: &str) -> u64 {
    text.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3)
    })
}

/// Seed of trial `trial` at the grid point identified by `point_key`.
pub fn derive_seed(base_seed: u64, point_key: &str, trial: u64) -> u64 {
    let point = mix64(base_seed ^ mix64(stable_hash(point_key)));
    mix64(point ^ mix64(trial.wrapping_mul(GOLDEN)))
}

/// Random stream for the leaf named `leaf_name` in a trial seeded with `seed`.
pub fn leaf_rng(seed: u64, leaf_name: &str) -> LeafRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stable_hash(leaf_name));
    rng
}
