//! Data-parallel helpers. With the `parallel` feature the parallel arm runs on rayon;
//! without it every arm runs sequentially. Results never depend on the arm taken:
//! maps preserve order and reductions are order-independent or chunked deterministically.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for deterministic floating-point sums.
const SUM_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// True when this arm actually runs on a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..len).map(f).collect()`.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Applies `f(i, &mut data[i])` to every element.
    pub fn for_each_mut<T, F>(self, data: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_iter_mut().enumerate().for_each(|(i, v)| f(i, v));
            return;
        }
        data.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    }

    /// Applies `f(c, chunk)` to consecutive chunks of length `len` (the last may be shorter).
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(len).enumerate().for_each(|(c, v)| f(c, v));
            return;
        }
        data.chunks_mut(len).enumerate().for_each(|(c, v)| f(c, v));
    }

    /// Maximum of `f(i)` over `0..len` (−∞ when empty). NaN propagates.
    pub fn max<F>(self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let pick = |a: f64, b: f64| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) };
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len).into_par_iter().map(&f).reduce(|| f64::NEG_INFINITY, pick);
        }
        (0..len).map(f).fold(f64::NEG_INFINITY, pick)
    }

    /// Minimum of `f(i)` over `0..len` (+∞ when empty).
    pub fn min<F>(self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        -self.max(len, |i| -f(i))
    }

    /// Σ f(i) with a summation order fixed by chunk boundaries, so both arms agree bitwise.
    pub fn sum<F>(self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunks = len.div_ceil(SUM_CHUNK);
        let partial = self.map(chunks, |c| {
            let lo = c * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        });
        partial.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arms_agree() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = Execution::Parallel;
        let b = Execution::Sequential;
        assert_eq!(a.map(1000, f), b.map(1000, f));
        assert_eq!(a.sum(100_000, f).to_bits(), b.sum(100_000, f).to_bits());
        assert_eq!(a.max(5000, f), b.max(5000, f));
        assert_eq!(a.min(0, f), f64::INFINITY);
        let mut v = vec![0.0; 100];
        a.for_each_mut(&mut v, |i, x| *x = i as f64);
        assert_eq!(v[42], 42.0);
    }
}
