//! Counter-based Gaussian noise. Every draw is addressed by
//! `(seed, particle, step, slot)`, so results do not depend on how particles
//! are distributed over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ensemble::Vec3;

/// 32-bit ChaCha words reserved per `(step, slot)` address.
const WORDS_PER_SLOT: u128 = 256;
const SLOTS_PER_STEP: u128 = 4;

pub trait NoiseSource: Sync {
    /// Standard normal vector with `dim` nonzero components.
    fn gaussian(&self, particle: usize, step: u64, slot: u32, dim: usize) -> Vec3;
}

#[derive(Debug, Clone)]
pub struct CounterNoise {
    base: ChaCha8Rng,
}

impl CounterNoise {
    pub fn new(seed: u64) -> Self {
        Self { base: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl NoiseSource for CounterNoise {
    fn gaussian(&self, particle: usize, step: u64, slot: u32, dim: usize) -> Vec3 {
        debug_assert!((slot as u128) < SLOTS_PER_STEP);
        let mut rng = self.base.clone();
        rng.set_stream(particle as u64);
        rng.set_word_pos((step as u128 * SLOTS_PER_STEP + slot as u128) * WORDS_PER_SLOT);
        let mut out = Vec3::zeros();
        for k in 0..dim {
            out[k] = StandardNormal.sample(&mut rng);
        }
        out
    }
}

/// Always returns the zero vector; turns the stochastic schemes into their
/// deterministic counterparts.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn gaussian(&self, _particle: usize, _step: u64, _slot: u32, _dim: usize) -> Vec3 {
        Vec3::zeros()
    }
}
