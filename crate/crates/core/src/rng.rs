//! Counter-based random numbers.
//!
//! Every variate is a pure function of `(seed, trial, stream, counter)`, so a
//! trial can be regenerated in isolation and trial ranges can be split across
//! workers without changing any drawn value. The mixing function is the
//! SplitMix64 finalizer; draw `k` of a stream is the `k+1`-th output of a
//! SplitMix64 sequence started at the stream key.
//!
//! Normal variates are produced by inverting the standard normal CDF, which
//! keeps the sampler independent of any particular distribution backend.

use crate::special::phi_inv;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the key of one stream. Distinct `(seed, trial, stream)` triples map
/// to unrelated keys.
pub fn stream_key(seed: u64, trial: u64, stream: u64) -> u64 {
    let s = mix64(stream.wrapping_add(0x632b_e59b_d9b4_e019));
    let t = mix64(trial ^ s);
    mix64(seed.wrapping_mul(GOLDEN) ^ t)
}

/// A random stream addressed by counter.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, trial: u64, stream: u64) -> Self {
        CounterRng {
            key: stream_key(seed, trial, stream),
            counter: 0,
        }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform_at(&self, counter: u64) -> f64 {
        ((self.u64_at(counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal_at(&self, counter: u64) -> f64 {
        phi_inv(self.uniform_at(counter))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.u64_at(self.counter);
        self.counter += 1;
        v
    }

    pub fn next_uniform(&mut self) -> f64 {
        let v = self.uniform_at(self.counter);
        self.counter += 1;
        v
    }

    pub fn next_normal(&mut self) -> f64 {
        let v = self.normal_at(self.counter);
        self.counter += 1;
        v
    }

    /// Fills `out` with the normals at counters `0..out.len()`.
    pub fn fill_normals(&self, out: &mut [f64]) {
        for (k, x) in out.iter_mut().enumerate() {
            *x = self.normal_at(k as u64);
        }
    }
}
