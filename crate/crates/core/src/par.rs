//! Execution policy for the data-parallel kernels.
//!
//! Every hot loop in the crate is written once against [`Exec`]. With the
//! `parallel` feature (default) the policy can be chosen at run time, which is
//! what the benchmarks use to compare both paths; without it everything runs
//! sequentially and `Exec::Parallel` degrades to the sequential loop.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Calls `f(i, chunk)` on consecutive `len`-sized chunks of `data`.
    pub fn for_each_chunk<T, F>(self, data: &mut [T], len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => data.par_chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c)),
            _ => data.chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c)),
        }
    }

    /// Like [`Self::for_each_chunk`] but returns one value per chunk, in order.
    pub fn map_chunks<T, R, F>(self, data: &mut [T], len: usize, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => data
                .par_chunks_mut(len)
                .enumerate()
                .map(|(i, c)| f(i, c))
                .collect(),
            _ => data.chunks_mut(len).enumerate().map(|(i, c)| f(i, c)).collect(),
        }
    }

    /// Calls `f(i, item)` on every element, returning results in order.
    pub fn map_mut<T, R, F>(self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter_mut().enumerate().map(|(i, t)| f(i, t)).collect(),
            _ => items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }

    /// `(0..n).map(f).collect()`, order preserved.
    pub fn map<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Runs two closures, concurrently when parallel.
    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => rayon::join(a, b),
            _ => (a(), b()),
        }
    }
}
