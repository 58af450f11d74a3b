//! Seed derivation.
//!
//! Child seeds are derived with the SplitMix64 finalizer applied to the
//! parent seed combined with each component in turn:
//!
//! ```text
//! h = splitmix64(parent ^ splitmix64(component + 0x9E3779B97F4A7C15))
//! ```
//!
//! so `derive_seed(master, &[condition, dyad])` is stable across platforms
//! and independent of execution order.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix_seed(parent: u64, component: u64) -> u64 {
    splitmix64(parent ^ splitmix64(component.wrapping_add(GOLDEN)))
}

pub fn derive_seed(master: u64, components: &[u64]) -> u64 {
    components.iter().fold(master, |acc, &c| mix_seed(acc, c))
}
