//! Thread-pool plumbing. With the `parallel` feature disabled every caller
//! falls back to its sequential loop.

#[cfg(feature = "parallel")]
pub(crate) fn pool(threads: usize) -> crate::error::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::error::Error::Config(format!("cannot start {threads} threads: {e}")))
}

/// Maps `f` over `items`, in parallel when `threads > 1` and the feature is
/// enabled. Output order always matches input order.
pub(crate) fn map<T, R, F>(items: &[T], threads: usize, f: F) -> crate::error::Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads > 1 {
        use rayon::prelude::*;
        return Ok(pool(threads)?.install(|| items.par_iter().map(&f).collect()));
    }
    let _ = threads;
    Ok(items.iter().map(f).collect())
}

/// Default worker count: all available cores.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
