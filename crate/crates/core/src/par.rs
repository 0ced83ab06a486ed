//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the loops below run on the rayon pool that is
//! current at the call site; without it they are plain iterators. Every helper
//! keeps a fixed partition of the work, so results are bitwise identical for
//! any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f(row_index, row)` to every `width`-long row of `data`.
pub fn for_each_row<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
}

/// Like [`for_each_row`] but with per-worker scratch created by `init`.
pub fn for_each_row_init<T, S, I, F>(data: &mut [T], width: usize, init: I, f: F)
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width)
        .enumerate()
        .for_each_init(&init, |s, (i, row)| f(s, i, row));
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        data.chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(&mut s, i, row));
    }
}

/// Element-wise in-place update over two equally long slices.
pub fn zip_mut<A, B, F>(a: &mut [A], b: &mut [B], f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut A, &mut B) + Sync + Send,
{
    assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    a.par_iter_mut()
        .zip(b.par_iter_mut())
        .enumerate()
        .for_each(|(i, (x, y))| f(i, x, y));
    #[cfg(not(feature = "parallel"))]
    a.iter_mut()
        .zip(b.iter_mut())
        .enumerate()
        .for_each(|(i, (x, y))| f(i, x, y));
}

/// Map `0..n` to a vector, preserving order.
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

/// Deterministic sum: per-row partials in parallel, then an ordered fold.
pub fn row_sum<F>(rows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_range(rows, f).into_iter().sum()
}
