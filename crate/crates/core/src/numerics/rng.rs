//! Keyed random streams and deterministic parallel reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::scalar::Real;

/// A ChaCha8 generator keyed by `(master_seed, stream_index)`.
///
/// The seed selects the key and the index selects the ChaCha stream, so
/// streams with different indices never overlap.
#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

pub fn make_stream(master_seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    RandomStream { master_seed, stream_index: index, rng }
}

impl RandomStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Waiting time to the next arrival of a Poisson process with `rate`.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        let e: f64 = Exp1.sample(&mut self.rng);
        e / rate
    }

    /// Number of events with the given mean; zero when `mean <= 0`.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let dist = Poisson::new(mean).expect("positive finite Poisson mean");
        let k: f64 = dist.sample(&mut self.rng);
        k as u64
    }

    pub fn normal<T: Real>(&mut self, mean: T, std: T) -> T {
        mean + std * T::lit(self.standard_normal())
    }
}

/// Number of items handled by one random stream in chunked parallel work.
/// Fixed so the draws do not depend on the worker count.
pub const CHUNK: usize = 1 << 14;

/// Maps `f(chunk_index, range)` over `0..n` in fixed-size chunks, in parallel,
/// and concatenates the per-chunk outputs in index order.
pub fn par_chunks<R, F>(n: usize, chunk: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64, std::ops::Range<usize>) -> Vec<R> + Sync,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let parts: Vec<Vec<R>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            let end = (start + chunk).min(n);
            f(c as u64, start..end)
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Pairwise sum with a fixed tree shape: the result depends only on the
/// order of `xs`, never on how the values were produced.
pub fn tree_sum<T: Real>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        n if n <= 8 => xs.iter().fold(T::zero(), |a, &b| a + b),
        n => {
            let (l, r) = xs.split_at(n / 2);
            tree_sum(l) + tree_sum(r)
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se<T: Real>(xs: &[T]) -> (T, T) {
    let n = xs.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nf = T::from_usize_lossy(n);
    let mean = tree_sum(xs) / nf;
    if n == 1 {
        return (mean, T::zero());
    }
    let dev: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = tree_sum(&dev) / (nf - T::one());
    (mean, (var / nf).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = make_stream(7, 3);
        let mut b = make_stream(7, 3);
        for _ in 0..1000 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let n = 100_000;
        let mut a = make_stream(42, 0);
        let mut b = make_stream(42, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.standard_normal()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() <= 3.0 / (n as f64).sqrt(), "corr = {corr}");
    }

    #[test]
    fn poisson_mean() {
        let n = 100_000;
        let mut s = make_stream(42, 9);
        let total: u64 = (0..n).map(|_| s.poisson(2.0)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 2.0).abs() <= 3.0 * (2.0 / n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn exponential_mean() {
        let n = 100_000;
        let mut s = make_stream(1, 2);
        let total: f64 = (0..n).map(|_| s.exponential(0.5)).sum();
        let mean = total / n as f64;
        // sd of Exp(0.5) is 2
        assert!((mean - 2.0).abs() <= 3.0 * 2.0 / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn tree_sum_is_worker_independent() {
        let xs: Vec<f64> = par_chunks(100_003, 1000, |c, r| {
            let mut s = make_stream(5, c);
            r.map(|_| s.standard_normal()).collect()
        });
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let ys: Vec<f64> = pool.install(|| {
            par_chunks(100_003, 1000, |c, r| {
                let mut s = make_stream(5, c);
                r.map(|_| s.standard_normal()).collect()
            })
        });
        assert_eq!(tree_sum(&xs).to_bits(), tree_sum(&ys).to_bits());
    }

    #[test]
    fn mean_and_se_small() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
