//! Deterministic fan-out over trial indices.
//!
//! Every trial derives its own seed from `(seed, index)`, so the output is a
//! pure function of the index. Results are collected in index order, which
//! makes the result independent of the worker count.

use crate::rng::derive_seed;

/// Number of workers to use when the caller passes `0`.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// `f(i)` for `i in 0..count`, in index order. `workers = 0` means all cores.
#[cfg(feature = "parallel")]
pub fn map_indices<T, F>(count: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let workers = if workers == 0 { default_workers() } else { workers };
    if workers <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F>(count: u64, _workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Runs `trials` independent trials; trial `i` receives `derive_seed(seed, i)`.
pub fn map_trials<T, F>(seed: u64, trials: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_indices(trials, workers, |i| f(derive_seed(seed, i)))
}
