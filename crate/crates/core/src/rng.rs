//! Seeded randomness shared by the searches and sampled test suites.
//!
//! The stream is SplitMix64 with its state initialized to the 64-bit seed
//! (Steele, Lea and Flood's constants: increment `0x9e3779b97f4a7c15`,
//! multipliers `0xbf58476d1ce4e5b9` and `0x94d049bb133111eb`). Derived draws
//! use only the following mappings of the raw `u64` output `r`, so any
//! implementation replays the same sequence:
//!
//! * `below(k)` = `r % k`
//! * `unit()` = `(r >> 11) * 2^-53`, uniform on `[0, 1)`
//! * `range(lo, hi)` = `lo + below(hi - lo + 1)` for integers
//! * `rational(lo, hi, den)` = `range(lo * den, hi * den) / den`

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Default seed for searches when none is supplied.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: SplitMix64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn below(&mut self, k: u64) -> u64 {
        assert!(k > 0, "below(0)");
        self.next_u64() % k
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi);
        lo + self.below((hi - lo) as u64 + 1) as i64
    }

    /// Uniform multiple of `1/den` in `[lo, hi]`.
    pub fn rational(&mut self, lo: i64, hi: i64, den: i64) -> f64 {
        self.range(lo * den, hi * den) as f64 / den as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Strictly positive probability vector with entries on the `1/den` grid.
    pub fn rational_simplex(&mut self, n: usize, den: i64) -> Vec<f64> {
        assert!(
            den >= n as i64,
            "denominator too small for {n} positive parts"
        );
        // Each point gets one unit, the rest is spread one unit at a time.
        let mut units = vec![1i64; n];
        for _ in 0..(den - n as i64) {
            units[self.below(n as u64) as usize] += 1;
        }
        units.into_iter().map(|u| u as f64 / den as f64).collect()
    }

    /// Strictly positive probability vector with real entries.
    pub fn simplex(&mut self, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| 0.05 + self.unit()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    /// Random labelling of `n` points into at most `max_blocks` nonempty
    /// groups; every label in `0..blocks` is used.
    pub fn labels(&mut self, n: usize, blocks: usize) -> Vec<usize> {
        assert!(blocks >= 1 && blocks <= n);
        let mut labels: Vec<usize> = (0..n).map(|i| if i < blocks { i } else { 0 }).collect();
        for l in labels.iter_mut().skip(blocks) {
            *l = self.below(blocks as u64) as usize;
        }
        // Fisher-Yates shuffle, deterministic under the mappings above.
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            labels.swap(i, j);
        }
        labels
    }
}
