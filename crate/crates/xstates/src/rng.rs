//! Seeded random sampling.
//!
//! Every randomized operation in the crate is deterministic given a `u64`
//! seed. Parallel or repeated trials derive independent streams by adding
//! the trial index to the base seed, so reports are reproducible regardless
//! of execution order.

use nalgebra::{Matrix2, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bloch::C64;

/// Deterministic random stream used by all sampling operations.
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Stream for trial `index` of a batch rooted at `seed`.
    pub fn for_trial(seed: u64, index: u64) -> Self {
        Self::new(seed.wrapping_add(index))
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Centered complex normal with E|z|^2 = sigma^2.
    pub fn complex_normal(&mut self, sigma: f64) -> C64 {
        let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
        C64::new(s * self.normal(), s * self.normal())
    }

    pub fn bool(&mut self) -> bool {
        self.0.gen::<bool>()
    }

    pub fn complex_normal_mat2(&mut self, sigma: f64) -> Matrix2<C64> {
        Matrix2::from_fn(|_, _| self.complex_normal(sigma))
    }

    pub fn complex_normal_mat3(&mut self, sigma: f64) -> Matrix3<C64> {
        Matrix3::from_fn(|_, _| self.complex_normal(sigma))
    }
}
