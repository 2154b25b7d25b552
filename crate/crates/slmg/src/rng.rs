//! Seed derivation for reproducible randomness.
//!
//! Every random procedure in this crate draws from a ChaCha8 stream whose
//! seed is derived from a single root seed, a domain tag, and an index.
//! Derivation uses the SplitMix64 finalizer, so substreams are independent
//! of iteration order: generating item 7 before item 3 yields the same
//! population as the reverse.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep unrelated substreams of one root seed disjoint.
pub mod domain {
    pub const CLASS_TEMPLATES: u64 = 1;
    pub const ITEM_DISTRIBUTION: u64 = 2;
    pub const ITEM_FEATURES: u64 = 3;
    pub const ITEM_ANNOTATIONS: u64 = 4;
    pub const BUDGET_RUN: u64 = 5;
    pub const SUBSAMPLE: u64 = 6;
    pub const PARAM_INIT: u64 = 7;
    pub const HARD_SHUFFLE: u64 = 8;
    pub const SOFT_SHUFFLE: u64 = 9;
    pub const SPLIT: u64 = 10;
    pub const CLE_SAMPLE: u64 = 11;
}

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of substream (`domain`, `index`) from `root`.
pub fn derive_seed(root: u64, domain: u64, index: u64) -> u64 {
    mix(mix(mix(root) ^ domain) ^ index)
}

/// ChaCha8 generator for substream (`domain`, `index`) of `root`.
pub fn stream(root: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, domain, index))
}
