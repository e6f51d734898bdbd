//! Seeded Gaussian streams.
//!
//! Every stream is ChaCha20 keyed by the 64-bit master seed and selected by a
//! 64-bit stream id, so substreams for `(trial, purpose)` never overlap and
//! can be regenerated independently. Normal deviates come from Box–Muller
//! with the pure-Rust `libm` transcendental functions for bit-stable output
//! across platforms.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::linalg::Vector;

/// Packs `(major, minor)` into one ChaCha stream id.
pub fn stream_id(major: u64, minor: u64) -> u64 {
    (major << 24) ^ minor
}

#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        GaussianStream { rng, spare: None }
    }

    /// Substream for a `(major, minor)` pair, e.g. `(trial, purpose)`.
    pub fn substream(seed: u64, major: u64, minor: u64) -> Self {
        Self::new(seed, stream_id(major, minor))
    }

    /// Uniform on the half-open interval (0, 1].
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let th = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(th));
        r * libm::cos(th)
    }

    pub fn normal_vector(&mut self, n: usize) -> Vector {
        Vector((0..n).map(|_| self.standard_normal()).collect())
    }
}
