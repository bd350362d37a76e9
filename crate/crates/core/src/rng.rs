//! Seeded pseudo-random generator for reproducible network synthesis.
//!
//! The generator is the splitmix-style 64-bit mixer: the state advances by
//! the additive constant `0x9E3779B97F4A7C15` and each output is the state
//! passed through two xor-shift-multiply rounds (`>> 30` then
//! `* 0xBF58476D1CE4E5B9`, `>> 27` then `* 0x94D049BB133111EB`) and a final
//! `>> 31` xor. The exact constants are part of the case-synthesis contract:
//! any implementation using them reproduces the same synthesized networks
//! byte for byte.

/// Splitmix-style 64-bit generator with a single `u64` of state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Creates a generator whose whole state is `seed`.
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Returns the next 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Returns a value in `0..bound` by modulo reduction.
    ///
    /// The tiny modulo bias is irrelevant here; the contract is
    /// reproducibility, and the reduction rule (plain `%`) is part of it.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below requires a positive bound");
        self.next_u64() % bound
    }

    /// Returns a float uniform in `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
