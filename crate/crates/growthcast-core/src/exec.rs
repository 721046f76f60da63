//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers below fan work out
//! over rayon; without it they run sequentially and rayon is not linked.
//! Every parallel path is gather-style or reduces in a fixed order, so
//! results are bit-identical to the sequential fallback regardless of
//! thread count. [`force_sequential`] flips the compiled-in parallel
//! paths off at runtime, which is what the benchmark suite uses to
//! compare both modes within one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Disable (or re-enable) the parallel paths at runtime.
///
/// No-op when the crate is built without the `parallel` feature.
pub fn force_sequential(on: bool) {
    #[cfg(feature = "parallel")]
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
    #[cfg(not(feature = "parallel"))]
    let _ = on;
}

/// True when work will actually be fanned out over threads.
pub fn parallel_enabled() -> bool {
    #[cfg(feature = "parallel")]
    {
        !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Map a slice, collecting results in input order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Map indices `0..n`, collecting results in index order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Visit equal-sized chunks of `data` mutably, tagged with chunk index.
///
/// Each chunk is written by exactly one task, so the result does not
/// depend on scheduling.
pub fn for_each_chunk_mut<E, F>(data: &mut [E], chunk: usize, f: F)
where
    E: Send,
    F: Fn(usize, &mut [E]) + Sync + Send,
{
    debug_assert!(chunk > 0 && data.len() % chunk == 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}
