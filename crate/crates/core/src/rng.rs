//! Seedable random streams for chains.
//!
//! Each chain draws from xoshiro256++ seeded with `seed_from_u64(seed)`
//! (SplitMix64 expansion of the 64-bit seed). Chain `i` of a batch advances
//! that state by `i` calls of `jump()`, i.e. by `i · 2^128` outputs, so
//! streams never overlap in practice.
//!
//! Uniforms are `(next_u64 >> 11) · 2^-53` in `[0, 1)`. Gaussians come from
//! the Marsaglia polar method: draw `u, v` as `2·uniform − 1` until
//! `0 < s = u² + v² < 1`, return `u·√(−2 ln s / s)` and cache
//! `v·√(−2 ln s / s)` for the next call.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Clone, Debug)]
pub struct ChainRng {
    inner: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl ChainRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..stream {
            inner.jump();
        }
        ChainRng { inner, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.gaussian();
        }
    }

    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill_gaussian(&mut v);
        v
    }
}
