//! SplitMix64, the generator behind every seeded draw in this crate.
//!
//! The algorithm is fixed so that datasets and initial parameters can be
//! reproduced bit for bit by other implementations:
//!
//! ```text
//! state = state + 0x9E3779B97F4A7C15          (wrapping)
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9    (wrapping)
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB    (wrapping)
//! out = z ^ (z >> 31)
//! ```
//!
//! A unit draw is `(out >> 11) * 2^-53` in `[0, 1)`, and a symmetric draw
//! in `[-amp, amp)` is `amp * (2u - 1)`.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-amp, amp)`.
    pub fn symmetric(&mut self, amp: f64) -> f64 {
        amp * (2.0 * self.unit() - 1.0)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `0..n` (modulo reduction; `n` is always tiny here).
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}
