//! Deterministic splittable random streams.
//!
//! Every stochastic step in the crate draws from a stream derived from
//! `(seed, tag, indices...)`, so results are independent of evaluation order
//! and thread scheduling. The generator is splitmix64; streams are derived by
//! hashing the parent state together with the key words.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream tags keeping unrelated consumers of the same run seed decorrelated.
pub mod streams {
    pub const INIT: u64 = 0x5052_494e_5449; // param init
    pub const DATA: u64 = 0x4441_5441; // dataset generation
    pub const SHUFFLE: u64 = 0x5348_5546; // dataset shuffle
    pub const SAMPLE: u64 = 0x534d_504c; // trajectory sampling
    pub const EVAL: u64 = 0x4556_414c; // inference-time sampling
}

/// Deterministic PRNG with cheap stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng {
            state: mix64(seed ^ GOLDEN),
        }
    }

    /// Derive an independent child stream keyed by `words`.
    ///
    /// Does not advance `self`; the same `(parent, words)` pair always yields
    /// the same stream.
    pub fn derive(&self, words: &[u64]) -> Rng {
        let mut s = self.state;
        for &w in words {
            s = mix64(s.wrapping_mul(0x0000_0100_0000_01b3) ^ w.wrapping_add(GOLDEN));
        }
        Rng { state: s }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Sample an index from a probability vector.
    ///
    /// Entries with exactly zero mass are never selected.
    pub fn pick_weighted(&mut self, probs: &[f64]) -> usize {
        let u = self.next_f64();
        let mut cum = 0.0;
        let mut last_positive = None;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                cum += p;
                last_positive = Some(i);
                if u < cum {
                    return i;
                }
            }
        }
        // Floating-point shortfall in the cumulative sum.
        last_positive.expect("pick_weighted needs at least one positive entry")
    }
}
