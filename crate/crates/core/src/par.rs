//! Row-parallel helpers.
//!
//! With the `parallel` feature the helpers split work over rayon's pool once
//! the problem is large enough to amortise the fork. Every helper writes each
//! output slot from exactly one closure call, so serial and parallel runs are
//! bitwise identical.

/// Below this many items the parallel paths fall back to a plain loop.
pub const PAR_THRESHOLD: usize = 2048;

#[cfg(feature = "parallel")]
const CHUNK: usize = 512;

/// `out[i] = f(i)` for every slot, serially.
pub fn fill_serial<T, F>(out: &mut [T], f: F)
where
    F: Fn(usize) -> T,
{
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// `out[i] = f(i)` for every slot, split over the rayon pool.
#[cfg(feature = "parallel")]
pub fn fill_par<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, o) in chunk.iter_mut().enumerate() {
                *o = f(base + k);
            }
        });
}

/// Dispatches to [`fill_par`] when compiled with `parallel` and the slice is
/// large, otherwise to [`fill_serial`].
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if out.len() >= PAR_THRESHOLD {
        return fill_par(out, f);
    }
    fill_serial(out, f)
}

/// Collects `f(0..n)` in index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if n >= PAR_THRESHOLD / 8 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Like [`map_collect`] but always parallel when the feature is on, for
/// coarse-grained work items (whole solves, dense columns).
pub fn map_collect_coarse<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
