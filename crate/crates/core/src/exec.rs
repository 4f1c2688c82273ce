//! Deterministic data-parallel execution.
//!
//! Work is split into fixed-size chunks whose partial results are merged in
//! chunk order, so the outcome is bit-identical whether chunks run on one
//! thread, on a rayon pool, or with the `parallel` feature disabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Points per chunk for batch loss/gradient evaluation. Fixed independently
/// of thread count; changing it changes reduction order (and hence the last
/// bits of results), so it is a constant, not a tunable.
pub const CHUNK: usize = 256;

/// Maps fixed chunks of `items` through `f`, in parallel when the `parallel`
/// feature is enabled. Results arrive ordered by chunk index.
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync,
{
    map_chunks_mode(true, items, chunk, f)
}

/// Like [`map_chunks`] but with an explicit mode: `parallel = false` forces
/// the sequential path even in parallel builds (identical chunking, so the
/// results are bit-identical either way).
pub fn map_chunks_mode<T, R, F>(parallel: bool, items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items
            .par_chunks(chunk)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
    }
    let _ = parallel;
    map_chunks_seq(items, chunk, f)
}

/// Sequential chunk map with the same chunking and merge order as
/// [`map_chunks`]; used by the benches to compare both modes within one
/// build, and as the fallback when `parallel` is disabled.
pub fn map_chunks_seq<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    F: Fn(usize, &[T]) -> R,
{
    items.chunks(chunk).enumerate().map(|(i, c)| f(i, c)).collect()
}
