//! Order-fixed reductions.
//!
//! Work is split into chunks of a fixed size that does not depend on the
//! thread pool. Chunks may be mapped in parallel, but their results are
//! combined in a fixed pairwise tree, so the floating point result is
//! bit-identical for any number of threads.

use rayon::prelude::*;

pub const CHUNK: usize = 512;

/// Pairwise (tree) summation in index order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// Combine `items` with `combine` along a balanced binary tree.
pub fn tree_reduce<T, F>(mut items: Vec<T>, combine: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Map fixed-size chunks of `items` in parallel and reduce the per-chunk
/// results in a fixed tree order. Errors from the earliest failing chunk win.
pub fn map_reduce<I, T, E, M, C>(items: &[I], map: M, combine: C) -> Result<Option<T>, E>
where
    I: Sync,
    T: Send,
    E: Send,
    M: Fn(&[I]) -> Result<T, E> + Sync,
    C: Fn(T, T) -> T,
{
    let parts: Vec<Result<T, E>> = items.par_chunks(CHUNK).map(&map).collect();
    let mut ok = Vec::with_capacity(parts.len());
    for p in parts {
        ok.push(p?);
    }
    Ok(tree_reduce(ok, combine))
}

/// As [`map_reduce`], over the index range `0..len` split into `CHUNK`-sized ranges.
pub fn map_reduce_range<T, E, M, C>(len: usize, map: M, combine: C) -> Result<Option<T>, E>
where
    T: Send,
    E: Send,
    M: Fn(std::ops::Range<usize>) -> Result<T, E> + Sync,
    C: Fn(T, T) -> T,
{
    let chunks = len.div_ceil(CHUNK);
    let parts: Vec<Result<T, E>> = (0..chunks)
        .into_par_iter()
        .map(|c| map(c * CHUNK..((c + 1) * CHUNK).min(len)))
        .collect();
    let mut ok = Vec::with_capacity(parts.len());
    for p in parts {
        ok.push(p?);
    }
    Ok(tree_reduce(ok, combine))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn map_reduce_independent_of_pool() {
        let v: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    map_reduce(&v, |c| Ok::<_, ()>(pairwise_sum(c)), |a, b| a + b)
                        .unwrap()
                        .unwrap()
                })
        };
        assert_eq!(run(1).to_bits(), run(7).to_bits());
    }

    #[test]
    fn tree_reduce_empty_is_none() {
        assert!(tree_reduce(Vec::<f64>::new(), |a, b| a + b).is_none());
    }
}
