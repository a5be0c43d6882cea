//! Replica fan-out. Results always come back in replica-index order, so
//! anything computed from them is independent of the degree of parallelism.

use rayon::prelude::*;

/// Run `job(i)` for `i in 0..count` on `parallelism` threads (all cores when
/// `None`) and collect in index order.
pub fn map_replicas<T, F>(count: u64, parallelism: Option<usize>, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match parallelism {
        Some(1) => (0..count).map(job).collect(),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(|| (0..count).into_par_iter().map(&job).collect()),
        None => (0..count).into_par_iter().map(job).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_values_do_not_depend_on_threads() {
        let f = |i: u64| i * i + 1;
        let a = map_replicas(100, Some(1), f);
        let b = map_replicas(100, Some(3), f);
        let c = map_replicas(100, None, f);
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a[7], 50);
    }
}
