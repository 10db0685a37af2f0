//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! a single `u64` seed. Stream 0 belongs to model generation; trial `k`
//! of an experiment draws from stream `k + 1`. Streams are independent
//! counters, so trials can run in any order or in parallel and still see
//! the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator used to draw random models and states.
pub fn model_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_add(1));
    rng
}
