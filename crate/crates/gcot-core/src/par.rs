//! Parallel/sequential dispatch helpers.
//!
//! Every helper has a `_seq` twin that is always compiled; with the
//! `parallel` feature the plain name dispatches to rayon, without it the
//! plain name is an alias for the sequential twin. All reductions are
//! associative with index-ordered tie-breaking, so results do not depend
//! on the thread count or work splitting.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Order-preserving map over an index range.
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
        map_range_seq(n, f)
    }
}

pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Index of the minimum of `key(i)` over `0..n`; ties resolve to the
/// smallest index. Returns `None` for an empty range or when every key
/// is NaN.
pub fn argmin_by_key<F>(n: usize, key: F) -> Option<usize>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(|i| (key(i), i))
            .filter(|(k, _)| !k.is_nan())
            .reduce_with(pick_min)
            .map(|(_, i)| i)
    }
    #[cfg(not(feature = "parallel"))]
    {
        argmin_by_key_seq(n, key)
    }
}

#[cfg_attr(feature = "parallel", allow(dead_code))]
pub fn argmin_by_key_seq<F>(n: usize, key: F) -> Option<usize>
where
    F: Fn(usize) -> f64,
{
    (0..n)
        .map(|i| (key(i), i))
        .filter(|(k, _)| !k.is_nan())
        .reduce(pick_min)
        .map(|(_, i)| i)
}

fn pick_min(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}
