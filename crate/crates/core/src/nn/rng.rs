//! Seeded randomness.
//!
//! Every random draw in the toolkit (weight init, shuffling, dropout masks,
//! dataset sampling) comes from PCG-64 MCG (`rand_pcg::Pcg64Mcg`, 128-bit
//! multiplicative congruential state with XSL-RR output) seeded through
//! `SeedableRng::seed_from_u64`. Both are value-stable across platforms.
//! Changing the algorithm requires bumping [`RNG_VERSION`].

use rand::SeedableRng;

pub type Rng = rand_pcg::Pcg64Mcg;

/// Recorded alongside seeds in checkpoints, manifests and reports.
pub const RNG_VERSION: &str = "pcg64mcg-v1";

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a named purpose from a base seed.
pub fn derive(seed: u64, purpose: &str) -> Rng {
    // FNV-1a over the purpose tag, mixed into the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seeded(seed ^ h.rotate_left(17))
}
