//! Seeded randomness.
//!
//! Every stream is xoshiro256++ whose 256-bit state is filled from a 64-bit
//! seed by SplitMix64. Derived values are built only from `next_u64` with the
//! conversions documented on each method, so a dataset can be regenerated
//! from its seeds by any implementation of those two generators.

use rand::{Rng as _, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a named sub-stream: `mix64(parent ^ mix64(tag + γ))`,
/// γ being the SplitMix64 increment.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ mix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub struct Rng(Xoshiro256PlusPlus);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`: the top 53 bits scaled by 2⁻⁵³.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer in `[0, n)` by widening multiply (`(x · n) >> 64`).
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// One bit: the most significant bit of the next output.
    pub fn bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    pub fn bits(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.bit()).collect()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Number of trials up to and including the first success, `≥ 1`,
    /// by inversion: `⌈ln(1−U) / ln(1−p)⌉`.
    pub fn geometric(&mut self, p: f64) -> u64 {
        let u = self.uniform();
        ((1.0 - u).ln() / (1.0 - p).ln()).ceil().max(1.0) as u64
    }

    /// Standard normal by Box–Muller (cosine branch).
    pub fn gaussian(&mut self) -> f64 {
        self.gaussian_pair().0
    }

    /// Two independent standard normals from one Box–Muller draw.
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Fisher–Yates, walking from the end.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
