//! Seedable deterministic randomness: SplitMix64 mixing and the
//! xoshiro256** generator used everywhere a simulation draws randomness.
//!
//! Streams are bit-exact functions of their seed. Subsystems derive
//! independent streams with [`derive_stream_seed`] so adding a draw in one
//! subsystem never perturbs another.

/// SplitMix64 mix step: advance by the golden gamma, then finalize.
///
/// Also serves as the word-fold primitive for block hashing.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a purpose tag.
pub fn derive_stream_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ tag)
}

/// xoshiro256** generator, seeded by SplitMix64 expansion of a 64-bit seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicRng {
    state: [u64; 4],
}

impl DeterministicRng {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let mut state = [0u64; 4];
        for word in &mut state {
            sm = sm.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = sm;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            *word = z ^ (z >> 31);
        }
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw in `(0, 1]`, suitable for `-ln(u)` sampling.
    pub fn next_unit_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in `[0, bound]` (inclusive). `bound + 1` must not overflow.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % (bound + 1)
    }
}
