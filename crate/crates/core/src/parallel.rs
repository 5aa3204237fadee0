//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature disabled, [`Execution::Parallel`] silently runs
//! sequentially, so callers never need their own `cfg` switches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Calls `f(index, chunk)` for consecutive chunks of `chunk_len` elements.
    pub fn for_each_chunk<T, F>(self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }

    /// Calls `f(index, item, chunk)` pairing each item of `items` with a chunk of `data`.
    pub fn for_each_zip<T, U, F>(self, items: &mut [U], data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        U: Send,
        F: Fn(usize, &mut U, &mut [T]) + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            items
                .par_iter_mut()
                .zip(data.par_chunks_mut(chunk_len))
                .enumerate()
                .for_each(|(i, (u, c))| f(i, u, c));
            return;
        }
        items
            .iter_mut()
            .zip(data.chunks_mut(chunk_len))
            .enumerate()
            .for_each(|(i, (u, c))| f(i, u, c));
    }

    /// Maps `0..n` to a vector, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}
