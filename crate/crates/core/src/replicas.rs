//! Parallel replica runner with results in replica order.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::ThreadPool;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SLFV_THREADS";

/// Worker count: `SLFV_THREADS` if set to a positive integer, else the
/// number of logical cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(thread_count())
            .thread_name(|i| format!("slfv-replica-{i}"))
            .build()
            .expect("replica thread pool")
    })
}

/// Runs `f(0), …, f(n-1)` on the replica pool and returns the results in
/// index order, independent of scheduling.
pub fn map_replicas<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    pool().install(|| (0..n).into_par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_replica_order() {
        let out = map_replicas(1000, |i| i * i);
        assert!(out.iter().enumerate().all(|(i, &v)| v == (i as u64) * (i as u64)));
    }
}
