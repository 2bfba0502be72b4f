//! Deterministic pseudo-random number generation.
//!
//! All randomness in the crate flows through [`SplitMix64`]: a 64-bit-state
//! counter-based generator (Steele, Lea & Flood / Vigna's `splitmix64`).
//! Outputs are a bijective mix of `seed + k * GOLDEN`, so the k-th draw of a
//! stream is well defined independently of platform, and disjoint streams
//! can be derived from a master seed by jumping the counter.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 generator; the full state is a single `u64` counter.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Next 64 uniform bits.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `[0, bound)` by rejection, bias-free.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        // Largest multiple of `bound` that fits in u64.
        let zone = u64::MAX - (u64::MAX % bound + 1) % bound;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % bound;
            }
        }
    }

    /// Uniform double in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller.
    pub fn next_normal(&mut self) -> f64 {
        // Avoid ln(0) by nudging the first uniform away from zero.
        let u1 = (self.next_u64() >> 11).max(1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Derive the seed of sub-stream `stream` from a master seed.
///
/// Equal to the `(stream + 1)`-th output of the master stream, so distinct
/// counters give independent-looking, reproducible seeds regardless of the
/// order in which workers consume them.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut g = SplitMix64::new(master.wrapping_add(stream.wrapping_mul(GOLDEN)));
    g.next_u64()
}
