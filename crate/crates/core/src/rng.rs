//! Counter-based random streams.
//!
//! Every Monte-Carlo sample owns an independent stream addressed by a
//! `(seed, row, sample)` triple, so results never depend on how samples are
//! scheduled across threads.
//!
//! # Algorithm
//!
//! The stream key is derived by absorbing the three words into a SplitMix64
//! state:
//!
//! ```text
//! k0  = mix64(seed ^ 0x6a09e667f3bcc908)
//! k1  = mix64(k0 ^ row)
//! key = mix64(k1 ^ sample)
//! ```
//!
//! and the i-th output (i = 1, 2, ...) is `mix64(key + i * 0x9e3779b97f4a7c15)`
//! with wrapping arithmetic, where `mix64` is the SplitMix64 finalizer:
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//! z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//! z ^ (z >> 31)
//! ```
//!
//! Uniform doubles in `[0, 1)` take the top 53 bits: `(u >> 11) * 2^-53`.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const SEED_SALT: u64 = 0x6a09_e667_f3bc_c908;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A keyed counter-based generator.
#[derive(Debug, Clone)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn new(seed: u64, row: u64, sample: u64) -> Self {
        let k0 = mix64(seed ^ SEED_SALT);
        let k1 = mix64(k0 ^ row);
        Self {
            key: mix64(k1 ^ sample),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform on `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}
