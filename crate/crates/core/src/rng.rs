//! Seeded random streams with index-addressable substreams.
//!
//! Every stream carries a 64-bit key. [`RngStream::substream`] derives a child
//! key from the parent key and an index only, never from draws already taken,
//! so work split across threads sees the same numbers in any schedule.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    inner: ChaCha8Rng,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let key = splitmix64(seed);
        Self {
            key,
            inner: ChaCha8Rng::seed_from_u64(key),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Child stream number `index`; independent of how many draws this stream has made.
    pub fn substream(&self, index: u64) -> Self {
        let key = splitmix64(self.key ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)));
        Self {
            key,
            inner: ChaCha8Rng::seed_from_u64(key),
        }
    }

    /// Equivalent to chaining [`Self::substream`] over `path`.
    pub fn substream_path(&self, path: &[u64]) -> Self {
        let mut key = self.key;
        for &index in path {
            key = splitmix64(key ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)));
        }
        Self {
            key,
            inner: ChaCha8Rng::seed_from_u64(key),
        }
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// `Exp(rate)` by inversion.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open0().ln() / rate
    }

    /// Index drawn with probability `weights[i] / total`.
    #[inline]
    pub fn categorical(&mut self, weights: &[f64], total: f64) -> usize {
        let target = self.uniform() * total;
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        // rounding: fall back to the last index with positive weight
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn substreams_ignore_parent_draws() {
        let a = RngStream::new(7);
        let mut b = RngStream::new(7);
        b.uniform();
        b.exponential(2.0);
        assert_eq!(a.substream(3).uniform(), b.substream(3).uniform());
        assert_ne!(a.substream(3).uniform(), a.substream(4).uniform());
        assert_eq!(
            a.substream(3).substream(9).uniform(),
            a.substream_path(&[3, 9]).uniform()
        );
    }

    #[test]
    fn exponential_mean() {
        let mut r = RngStream::new(1);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| r.exponential(4.0)).sum::<f64>() / n as f64;
        assert!((mean - 0.25).abs() < 4.0 * 0.25 / (n as f64).sqrt());
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut r = RngStream::new(3);
        for _ in 0..1000 {
            assert_eq!(r.categorical(&[0.0, 2.0, 0.0], 2.0), 1);
        }
    }
}
