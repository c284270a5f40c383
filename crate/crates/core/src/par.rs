//! Indexed fan-out over a worker pool, with a sequential path.
//!
//! Results always come back in index order and errors are reported for the
//! lowest failing index, so output never depends on scheduling. Without the
//! `parallel` feature everything runs on the calling thread.

use std::num::NonZeroUsize;

/// Worker count for Monte Carlo fan-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workers(NonZeroUsize);

impl Workers {
    pub fn new(count: usize) -> Self {
        Self(NonZeroUsize::new(count).unwrap_or(NonZeroUsize::MIN))
    }

    pub fn single() -> Self {
        Self(NonZeroUsize::MIN)
    }

    /// One worker per logical core.
    pub fn all() -> Self {
        Self(std::thread::available_parallelism().unwrap_or(NonZeroUsize::MIN))
    }

    pub fn get(self) -> usize {
        self.0.get()
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::all()
    }
}

/// Evaluates `f(0..count)` and collects the results in index order.
pub fn map_indexed<T, F>(count: usize, workers: Workers, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers.get() > 1 && count > 1 {
        use rayon::prelude::*;
        // building a pool only fails if the OS refuses threads; run inline then
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers.get()).build() {
            return pool.install(|| (0..count).into_par_iter().map(&f).collect());
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    (0..count).map(f).collect()
}

/// Fallible [`map_indexed`]: the error of the lowest failing index wins.
pub fn try_map_indexed<T, E, F>(count: usize, workers: Workers, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(count, workers, f).into_iter().collect()
}
