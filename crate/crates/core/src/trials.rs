//! Seeded, parallelism-independent trial execution.
//!
//! Trial `i` of an experiment with master seed `m` draws from
//! `ChaCha8Rng::seed_from_u64(trial_seed(m, i))`, and its result is stored in
//! slot `i` of the output. Neither depends on the number of workers or on
//! the order in which trials finish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type TrialRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under master seed `master`:
/// `mix64(master + (trial + 1)·γ)` with the SplitMix64 increment `γ`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    mix64(master.wrapping_add(trial.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn trial_rng(master: u64, trial: u64) -> TrialRng {
    TrialRng::seed_from_u64(trial_seed(master, trial))
}

/// Runs `job(0..trials)` on `workers` threads and returns results by index.
pub fn run_trials<T, F>(trials: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 {
        return (0..trials).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build trial thread pool");
    pool.install(|| (0..trials).into_par_iter().map(&job).collect())
}
