//! Deterministic seed derivation.
//!
//! Experiments fan out into many independent trials. Each trial's RNG is
//! derived from `(master seed, scenario index, trial index)` with a SplitMix64
//! chain, so trials can run in any order, on any number of threads, and still
//! reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche for seed mixing.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a per-trial seed from the master seed and the trial coordinates.
pub fn derive_seed(master_seed: u64, scenario: u64, trial: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(scenario ^ splitmix64(trial)))
}

/// Stream cipher RNG for a derived seed. ChaCha8 is plenty for simulation and
/// is identical on every platform.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convenience for the common `(master, scenario, trial)` pattern.
pub fn trial_rng(master_seed: u64, scenario: u64, trial: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(master_seed, scenario, trial))
}
