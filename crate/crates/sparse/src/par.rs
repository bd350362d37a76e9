//! Deterministic block-parallel execution helpers.
//!
//! All parallel kernels in this crate split their index space into contiguous
//! blocks of `ceil(n / thread_count)` and assign each block to one task. The
//! *arithmetic* (which value is computed from which block, and the order in
//! which per-block partial results are combined) depends only on `n` and
//! `thread_count`, never on how the runtime schedules the blocks, so results
//! are bit-identical across repeated runs for a fixed `thread_count`.

use std::ops::Range;

use rayon::prelude::*;

/// Size of each contiguous block for `n` items and `thread_count` workers.
pub fn block_len(n: usize, thread_count: usize) -> usize {
    let t = thread_count.max(1);
    n.div_ceil(t).max(1)
}

/// The contiguous block ranges covering `0..n`.
pub fn block_ranges(n: usize, thread_count: usize) -> Vec<Range<usize>> {
    let len = block_len(n, thread_count);
    (0..n.div_ceil(len).max(if n == 0 { 0 } else { 1 }))
        .map(|b| b * len..((b + 1) * len).min(n))
        .collect()
}

/// Runs `f` on every block and returns the per-block results in block order.
///
/// Single-block inputs run inline; multi-block inputs go through the rayon
/// pool. Either way the result vector is ordered by block index.
pub(crate) fn map_blocks<R, F>(n: usize, thread_count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync + Send,
{
    let ranges = block_ranges(n, thread_count);
    if ranges.len() <= 1 {
        ranges.into_iter().map(f).collect()
    } else {
        ranges.into_par_iter().map(f).collect()
    }
}

/// Fills `out` by running `f(range, chunk)` on matching contiguous chunks.
pub(crate) fn fill_blocks<T, F>(out: &mut [T], thread_count: usize, f: F)
where
    T: Send,
    F: Fn(Range<usize>, &mut [T]) + Sync + Send,
{
    let n = out.len();
    let len = block_len(n, thread_count);
    let ranges = block_ranges(n, thread_count);
    if ranges.len() <= 1 {
        if let Some(r) = ranges.into_iter().next() {
            f(r, out);
        }
    } else {
        out.par_chunks_mut(len)
            .zip(ranges.into_par_iter())
            .for_each(|(chunk, range)| f(range, chunk));
    }
}

/// Dot product with per-block partial sums combined in block order.
pub fn dot_blocked(x: &[f64], y: &[f64], thread_count: usize) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let partials = map_blocks(x.len(), thread_count, |r| {
        let mut acc = 0.0;
        for i in r {
            acc += x[i] * y[i];
        }
        acc
    });
    partials.into_iter().sum()
}

/// Euclidean norm built on the blocked dot product.
pub fn norm2_blocked(x: &[f64], thread_count: usize) -> f64 {
    dot_blocked(x, x, thread_count).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_ranges_cover_everything_once() {
        for n in [0usize, 1, 2, 7, 100, 101] {
            for t in [1usize, 2, 3, 8, 200] {
                let ranges = block_ranges(n, t);
                let mut seen = vec![false; n];
                for r in &ranges {
                    for i in r.clone() {
                        assert!(!seen[i]);
                        seen[i] = true;
                    }
                }
                assert!(seen.into_iter().all(|s| s), "n={n} t={t}");
                assert!(ranges.len() <= t.max(1));
            }
        }
    }

    #[test]
    fn blocked_dot_is_deterministic_per_thread_count() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.11).cos()).collect();
        for t in [1, 2, 4, 8] {
            let a = dot_blocked(&x, &y, t);
            let b = dot_blocked(&x, &y, t);
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Sanity: all thread counts agree to rounding error.
        let serial = dot_blocked(&x, &y, 1);
        for t in [2, 4, 8] {
            assert!((dot_blocked(&x, &y, t) - serial).abs() < 1e-10);
        }
    }
}
