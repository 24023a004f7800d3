//! Data parallel helpers with a sequential fallback.
//!
//! All science code expresses bulk work as independent maps over immutable
//! inputs and funnels them through this module. With the `parallel` feature
//! (default) the maps run on the rayon pool; without it they run serially
//! with identical results, since every task is a pure function and the
//! output order is the input order either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over owned items, in parallel when enabled.
pub fn map_items<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Map over an index range, in parallel when enabled.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
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

/// Sum f(i) over an index range. Reduction order differs between the two
/// backends, so callers must treat the result as accurate only to rounding;
/// anything entering a determinism contract goes through `map_range`
/// followed by a serial sum instead.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).sum()
    }
}

/// Size the global rayon pool; call once at startup. Returns the effective
/// worker count (1 without the feature).
pub fn configure_workers(workers: usize) -> usize {
    #[cfg(feature = "parallel")]
    {
        let w = workers.max(1);
        // Ignore the error when a pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let v: Vec<usize> = map_range(100, |i| i * i);
        for (i, x) in v.iter().enumerate() {
            assert_eq!(*x, i * i);
        }
    }

    #[test]
    fn map_items_matches_serial() {
        let items: Vec<i64> = (0..50).collect();
        let out = map_items(items.clone(), |x| x * 3 - 1);
        let want: Vec<i64> = items.iter().map(|x| x * 3 - 1).collect();
        assert_eq!(out, want);
    }
}
