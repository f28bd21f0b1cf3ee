//! Seeded randomness.
//!
//! Every random draw in the engine (initialization, shuffling, synthetic
//! data) comes from a [`SeededRng`], which wraps ChaCha8 from `rand_chacha`.
//! ChaCha output is specified by the cipher itself, so a given seed yields
//! the same stream on every platform and across runs.
//!
//! Independent consumers inside one run use separate ChaCha streams of the
//! same seed (see [`SeededRng::with_stream`]) so that, for example, drawing
//! extra initial weights never perturbs the batch order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::matrix::Matrix;

/// Stream used for weight initialization.
pub const STREAM_INIT: u64 = 0;
/// Stream used for epoch shuffles.
pub const STREAM_SHUFFLE: u64 = 1;
/// Stream used for synthetic data generation.
pub const STREAM_DATA: u64 = 2;

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        Normal::new(mean, sd)
            .expect("standard deviation must be finite and non-negative")
            .sample(&mut self.inner)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// Glorot/Xavier uniform initialization for a layer with `fan_in` inputs and
/// `fan_out` outputs. Returns a `fan_out × fan_in` weight matrix.
pub fn glorot_uniform(rng: &mut SeededRng, fan_in: usize, fan_out: usize) -> Matrix {
    assert!(fan_in >= 1 && fan_out >= 1, "fan_in and fan_out must be >= 1");
    let limit = glorot_limit(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform(-limit, limit))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data).expect("length matches by construction")
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// A uniformly random permutation of `0..n` (Fisher-Yates).
pub fn shuffle_indices(rng: &mut SeededRng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx
}
