//! Deterministic chunked map-reduce over replicate indices.
//!
//! Replicates are split into fixed-size chunks; each chunk is mapped by one
//! task and the chunk results are folded in index order. The fold sequence
//! is therefore identical for any worker count, which keeps floating-point
//! reductions (and hence reports) byte-identical across schedules.

use std::ops::Range;

/// Default replicates per chunk.
pub const DEFAULT_CHUNK: u64 = 256;

/// Map each chunk of `0..n` to an accumulator and fold the chunks in order.
///
/// Runs on the rayon pool when the `parallel` feature is enabled, falling
/// back to a plain loop otherwise. The result does not depend on which
/// backend ran it.
pub fn reduce_chunks<A, M, R>(n: u64, chunk: u64, map: M, reduce: R) -> Option<A>
where
    A: Send,
    M: Fn(Range<u64>) -> A + Sync,
    R: Fn(A, A) -> A,
{
    if n == 0 {
        return None;
    }
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let ranges = (0..n_chunks).map(|c| (c * chunk)..((c + 1) * chunk).min(n));

    #[cfg(feature = "parallel")]
    let parts: Vec<A> = {
        use rayon::prelude::*;
        ranges.collect::<Vec<_>>().into_par_iter().map(&map).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<A> = ranges.map(&map).collect();

    parts.into_iter().reduce(reduce)
}

/// Sequential twin of [`reduce_chunks`]; always single-threaded.
///
/// Exists so benchmarks can compare backends directly and so callers can
/// bypass the pool for tiny workloads.
pub fn reduce_chunks_seq<A, M, R>(n: u64, chunk: u64, map: M, reduce: R) -> Option<A>
where
    M: Fn(Range<u64>) -> A,
    R: Fn(A, A) -> A,
{
    if n == 0 {
        return None;
    }
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    (0..n_chunks)
        .map(|c| map((c * chunk)..((c + 1) * chunk).min(n)))
        .reduce(reduce)
}

/// Run `f` on a dedicated pool with `workers` threads (0 = library default).
///
/// With the `parallel` feature disabled the worker count is ignored and `f`
/// runs inline.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            f()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool")
                .install(f)
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}
