//! Counter-based deterministic RNG.
//!
//! All randomness in the crate flows through this splitmix64 stream so that
//! any implementation, in any language, can replicate the exact sequences.
//! The state advance is `state += 0x9E3779B97F4A7C15` followed by the
//! standard splitmix64 finalizer. Floats in `[0, 1)` take the top 53 bits.

/// Splitmix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero. Uses the modulo
    /// reduction; the bias is negligible for the small ranges used here and
    /// the reduction is trivially portable.
    pub fn next_below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller. Draws two uniforms per call and
    /// discards the second variate to keep the stream position predictable.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i + 1);
            xs.swap(i, j);
        }
    }
}

/// Derives an independent child seed from a base seed and a salt.
///
/// `derive_seed(base, a) != derive_seed(base, b)` for `a != b` with
/// overwhelming probability; the mapping is pure so worker pools can fan out
/// without sharing generator state.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    mix(base ^ mix(salt.wrapping_add(GOLDEN)))
}
