//! Worker pools and order-preserving parallel maps.
//!
//! Work is always split into the same pieces regardless of the worker
//! count and partial results are combined in index order, so results are
//! bit-identical for any number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Generator for sample `index` of a seeded run: ChaCha8 keyed by `seed`,
/// stream `index`. Samples are independent of evaluation order.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// `f` applied to every value of `lo..=hi`, results in order.
pub fn map_range<T: Send>(lo: i64, hi: i64, f: impl Fn(i64) -> T + Sync + Send) -> Vec<T> {
    if hi < lo {
        return Vec::new();
    }
    (lo..=hi).into_par_iter().map(f).collect()
}

/// `f` applied to consecutive chunks `[start, end]` of `lo..=hi` of a fixed
/// size, results in order.
pub fn map_chunks<T: Send>(
    lo: i64,
    hi: i64,
    chunk: i64,
    f: impl Fn(i64, i64) -> T + Sync + Send,
) -> Vec<T> {
    if hi < lo {
        return Vec::new();
    }
    let pieces = (hi - lo) / chunk + 1;
    (0..pieces)
        .into_par_iter()
        .map(|k| {
            let a = lo + k * chunk;
            f(a, (a + chunk - 1).min(hi))
        })
        .collect()
}

/// Visit every point of `prod [lo_j, hi_j]` in lexicographic order.
pub fn for_each_point(lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64])) {
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut q = lo.to_vec();
    loop {
        f(&q);
        let mut i = q.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if q[i] < hi[i] {
                q[i] += 1;
                break;
            }
            q[i] = lo[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_in_order() {
        let mut seen = Vec::new();
        for_each_point(&[0, -1], &[1, 0], |q| seen.push(q.to_vec()));
        assert_eq!(seen, vec![vec![0, -1], vec![0, 0], vec![1, -1], vec![1, 0]]);
        let mut none = 0;
        for_each_point(&[1], &[0], |_| none += 1);
        assert_eq!(none, 0);
        let mut empty = 0;
        for_each_point(&[], &[], |_| empty += 1);
        assert_eq!(empty, 1);
    }

    #[test]
    fn chunks_cover_range() {
        let parts = with_workers(3, || map_chunks(1, 10, 4, |a, b| (a, b))).unwrap();
        assert_eq!(parts, vec![(1, 4), (5, 8), (9, 10)]);
        assert_eq!(map_range(2, 4, |x| x * x), vec![4, 9, 16]);
    }
}
