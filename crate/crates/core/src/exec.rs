//! Bounded map over a batch of independent work items.
//!
//! With the `parallel` feature the work runs on a dedicated rayon pool of
//! `workers` threads (0 = one per logical CPU); otherwise, or when
//! `workers == 1`, it runs sequentially. Output order always matches input
//! order, so results are identical regardless of worker count.

/// Sequential map, always available. Benchmarks use this as the baseline.
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    F: Fn(&T) -> U + Sync,
{
    items.iter().map(f).collect()
}

/// Parallel map on a pool of `workers` threads (0 = rayon default).
#[cfg(feature = "parallel")]
pub fn map_par<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build();
    match pool {
        Ok(pool) => pool.install(|| items.par_iter().map(|t| f(t)).collect()),
        // Pool creation can only fail on resource exhaustion; degrade to
        // the sequential path rather than aborting the batch.
        Err(_) => map_seq(items, f),
    }
}

/// Map a batch with a worker bound, honoring the `parallel` feature.
pub fn map_bounded<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if workers == 1 {
            map_seq(items, f)
        } else {
            map_par(items, workers, f)
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        map_seq(items, f)
    }
}
