//! Counter-based round seeding.
//!
//! Every round draws from its own generator, seeded by hashing the run seed
//! together with the round index. Rounds can therefore be simulated in any
//! order, or split across partitions, and still produce identical outcomes.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator used for a single round.
pub type RoundRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const SEED_SALT: u64 = 0x5851_f42d_4c95_7f2d;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed for round `round_index` of a run seeded with `seed`.
#[inline]
pub fn derive_round_seed(seed: u64, round_index: u64) -> u64 {
    let key = mix64(seed ^ SEED_SALT);
    mix64(key.wrapping_add(round_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Generator for round `round_index`.
#[inline]
pub fn round_rng(seed: u64, round_index: u64) -> RoundRng {
    RoundRng::seed_from_u64(derive_round_seed(seed, round_index))
}
