//! Chunked parallel loops with a fixed association order.
//!
//! Every reduction splits the index range into `CHUNK`-sized blocks, sums each
//! block sequentially and then adds the block results left to right. The
//! block boundaries do not depend on the thread count, so the result is
//! bit-identical however many workers rayon uses.

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

pub(crate) fn sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partials: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                acc += f(i);
            }
            acc
        })
        .collect();
    partials.iter().sum()
}

pub(crate) fn max_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partials: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = 0.0f64;
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                acc = acc.max(f(i));
            }
            acc
        })
        .collect();
    partials.iter().fold(0.0, |a, &b| a.max(b))
}

pub(crate) fn fill_by<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * CHUNK;
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = f(base + k);
        }
    });
}

/// Like [`fill_by`], but the kernel may fail. The reported failure is the one
/// at the lowest node index, independent of scheduling.
pub(crate) fn try_fill_by<F, E>(out: &mut [f64], f: F) -> Result<(), E>
where
    F: Fn(usize) -> Result<f64, E> + Sync,
    E: Send,
{
    let failures: Vec<Option<E>> = out
        .par_chunks_mut(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, v) in chunk.iter_mut().enumerate() {
                match f(base + k) {
                    Ok(x) => *v = x,
                    Err(e) => return Some(e),
                }
            }
            None
        })
        .collect();
    match failures.into_iter().flatten().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_independent_of_pool_size() {
        let len = 3 * CHUNK + 17;
        let term = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let reference = sum_by(len, term);
        for threads in [1, 2, 3, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let s = pool.install(|| sum_by(len, term));
            assert_eq!(s.to_bits(), reference.to_bits());
        }
    }

    #[test]
    fn first_failure_wins() {
        let mut out = vec![0.0; 5 * CHUNK];
        let err = try_fill_by(&mut out, |i| if i % 3000 == 2999 { Err(i) } else { Ok(1.0) });
        assert_eq!(err, Err(2999));
    }
}
