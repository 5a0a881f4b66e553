//! Seeded random stream used for sampling.
//!
//! The generator is ChaCha20 (counter based), so the whole stream position is
//! a single `u128` word offset that can be checkpointed and restored.
//! Uniform variates take the top 53 bits of one `u64`. Gaussian variates use
//! the Box–Muller transform on consecutive uniform pairs `(u1, u2)`:
//!
//! ```text
//! r = sqrt(-2 ln(1 - u1)),  g1 = r cos(2π u2),  g2 = r sin(2π u2)
//! ```
//!
//! `fill_gaussian` consumes pairs in order; an odd-length request discards the
//! final `g2`, so the position after a call depends only on the request size.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct GaussianStream {
    seed: u64,
    rng: ChaCha20Rng,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// An independent stream for the same seed, selected by `stream`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        GaussianStream { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.rng.get_stream()
    }

    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn set_position(&mut self, word_pos: u128) {
        self.rng.set_word_pos(word_pos);
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    pub fn gaussian(&mut self) -> f64 {
        self.gaussian_pair().0
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for pair in &mut chunks {
            let (a, b) = self.gaussian_pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.gaussian_pair().0;
        }
    }
}
