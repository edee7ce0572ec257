//! Thin shim over rayon so the crate builds with or without the `parallel`
//! feature. Every helper preserves input order in its output, so results do
//! not depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether this build runs data-parallel loops on rayon.
pub const PARALLEL: bool = cfg!(feature = "parallel");

/// Order-preserving map over `0..n`.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Order-preserving map over a slice.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Slices shorter than this are processed on the calling thread; the
/// per-task overhead would dominate.
pub const CHUNK_PAR_MIN_LEN: usize = 1 << 14;

/// Applies `f` to consecutive `chunk`-sized mutable pieces of `data`,
/// passing the chunk index.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    if data.len() >= CHUNK_PAR_MIN_LEN {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// A fixed-size worker pool. Without the `parallel` feature (or if the
/// pool cannot be created) work runs on the calling thread.
pub struct Pool {
    #[cfg(feature = "parallel")]
    inner: Option<rayon::ThreadPool>,
}

impl Pool {
    pub fn new(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            Pool {
                inner: rayon::ThreadPoolBuilder::new()
                    .num_threads(workers.max(1))
                    .build()
                    .ok(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Pool {}
        }
    }

    pub fn install<R, F>(&self, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.inner {
            return pool.install(f);
        }
        f()
    }
}

/// Runs `f` with at most `workers` threads.
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    Pool::new(workers).install(f)
}
