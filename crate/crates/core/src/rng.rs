//! Splittable counter-based pseudo-random generator.
//!
//! Every random decision in the pipeline (parameter init, mask sampling,
//! shuffles, dropout) draws from a [`SplitRng`] derived from one run seed
//! and a stream label. The output at a given (key, counter) pair is a pure
//! function of both, so parallel consumers stay deterministic and a run can
//! be reproduced bit-for-bit from its seed.

use alloc::vec::Vec;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless generator keyed by a 64-bit value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitRng {
    key: u64,
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        SplitRng {
            key: mix(seed ^ GAMMA),
        }
    }

    /// Derive an independent stream from a label. Labels are hashed, so any
    /// short static string works.
    pub fn derive(&self, label: &str) -> Self {
        let mut h = self.key;
        for &b in label.as_bytes() {
            h = mix(h ^ u64::from(b).wrapping_mul(GAMMA));
        }
        SplitRng { key: mix(h) }
    }

    /// Derive an independent stream from an integer index.
    pub fn derive_index(&self, index: u64) -> Self {
        SplitRng {
            key: mix(self.key ^ index.wrapping_mul(GAMMA).wrapping_add(GAMMA)),
        }
    }

    /// The raw 64-bit output at `counter`.
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix(self.key.wrapping_add(counter.wrapping_mul(GAMMA)))
    }

    pub fn stream(&self) -> Stream {
        Stream {
            rng: *self,
            counter: 0,
        }
    }
}

/// Sequential view over a [`SplitRng`].
#[derive(Clone, Debug)]
pub struct Stream {
    rng: SplitRng,
    counter: u64,
}

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        let v = self.rng.u64_at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Unbiased uniform integer in [0, n). `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let n = items.len();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Uniform sample of `k` distinct values from 0..n, in sampling order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        // partial Fisher-Yates: the first k slots end up a uniform sample
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
