//! Counter-based random stream.
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so any
//! consumer can reconstruct exactly the numbers another consumer saw by
//! knowing those three values. The mixer is SplitMix64's finalizer.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        RngStream {
            seed,
            stream,
            counter: 0,
        }
    }

    /// An independent stream derived from this one's seed and stream id.
    pub fn fork(&self, child: u64) -> RngStream {
        let stream = mix64(self.stream.wrapping_mul(GOLDEN) ^ mix64(child.wrapping_add(GOLDEN)));
        RngStream::with_stream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// The draw at an explicit counter position; does not advance.
    pub fn draw_at(&self, counter: u64) -> u64 {
        let key = mix64(self.seed ^ GOLDEN) ^ mix64(self.stream.wrapping_add(0x632B_E59B_D9B4_E019));
        mix64(key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.draw_at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // Multiply-shift; bias is below 2^-64 * n and irrelevant here.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller (consumes two draws).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(7);
        let mut b = RngStream::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_eq!(RngStream::new(7).draw_at(41), {
            let mut c = RngStream::new(7);
            (0..41).for_each(|_| {
                c.next_u64();
            });
            c.next_u64()
        });
    }

    #[test]
    fn streams_and_seeds_differ() {
        let base = RngStream::new(1);
        assert_ne!(base.fork(0).draw_at(0), base.fork(1).draw_at(0));
        assert_ne!(RngStream::new(1).draw_at(0), RngStream::new(2).draw_at(0));
    }

    #[test]
    fn uniform_moments() {
        let mut r = RngStream::new(3);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| r.next_f64()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01);
        assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
        let zs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let zm = zs.iter().sum::<f64>() / n as f64;
        let zv = zs.iter().map(|z| (z - zm) * (z - zm)).sum::<f64>() / n as f64;
        assert!(zm.abs() < 0.02 && (zv - 1.0).abs() < 0.02);
    }
}
