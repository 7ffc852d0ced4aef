//! Data-parallel fan-out with a sequential fallback.
//!
//! Every Monte-Carlo inner loop in the crate (ensemble trainings,
//! leave-one-out sweeps, experiment cells) maps a pure function over an index
//! range and collects results in index order, so the output is identical at
//! any worker count. With the `parallel` feature (default) the map runs on
//! the rayon pool; without it, everything stays on one thread.

/// Maps `f` over `items`, preserving order. Parallel when the `parallel`
/// feature is enabled.
pub fn map_indexed<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Caps the worker pool at `n` threads. Must be called before the first
/// parallel map; later calls are ignored. No-op in sequential builds or when
/// `n` is 0.
pub fn configure_workers(n: usize) {
    #[cfg(feature = "parallel")]
    if n > 0 {
        // Ignore the error: the global pool can only be built once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Always-sequential variant, kept for benchmarking against the parallel
/// path.
pub fn map_indexed_seq<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let out = map_indexed((0..100).collect(), |i: usize| i * i);
        let seq = map_indexed_seq((0..100).collect(), |i: usize| i * i);
        assert_eq!(out, seq);
    }
}
