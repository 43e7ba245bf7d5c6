//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the closures run on the rayon pool; without
//! it they run in index order on the calling thread. Work is always split
//! into the same fixed-size chunks and results come back in index order, so
//! any reduction done by the caller is bit-identical for every thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default chunk length for particle and grid sweeps.
pub const CHUNK: usize = 4096;

/// Number of worker threads that will execute parallel sections.
pub fn thread_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Evaluates `f(i)` for `i in 0..n`, returning the results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps every `chunk`-sized block of `data` (last block may be short).
pub fn map_chunks<T, R, F>(data: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks(chunk).enumerate().map(|(i, c)| f(i, c)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks(chunk).enumerate().map(|(i, c)| f(i, c)).collect()
    }
}

/// Mutably maps every `chunk`-sized block of `data`.
pub fn map_chunks_mut<T, R, F>(data: &mut [T], chunk: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut [T]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).enumerate().map(|(i, c)| f(i, c)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().map(|(i, c)| f(i, c)).collect()
    }
}

/// Fills `out[i] = f(i)`.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_chunks_mut(out, CHUNK, |c, block| {
        let base = c * CHUNK;
        for (j, slot) in block.iter_mut().enumerate() {
            *slot = f(base + j);
        }
    });
}
