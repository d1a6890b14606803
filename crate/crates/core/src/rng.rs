//! Seeded random source.
//!
//! The generator is ChaCha20 (a counter-mode stream cipher, so the stream is
//! a pure function of seed and position) seeded through
//! `SeedableRng::seed_from_u64`. Normal variates use the Box-Muller transform:
//!
//! ```text
//! u1 = (k1 + 1) * 2^-53,  u2 = k2 * 2^-53       (k = next_u64 >> 11)
//! z0 = sqrt(-2 ln u1) * cos(2 pi u2)
//! z1 = sqrt(-2 ln u1) * sin(2 pi u2)
//! ```
//!
//! `z0` is returned first and `z1` is kept for the next call.

use num_complex::Complex;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::image::{ComplexImage, RealImage};
use crate::scalar::Scalar;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from this seed and a label. Used to give
    /// sub-tasks (masks, phantoms, per-case noise) their own generators.
    pub fn derive(seed: u64, stream: u64) -> Self {
        Self::new(Self::derive_seed(seed, stream))
    }

    /// Seed of the stream returned by [`Rng::derive`].
    pub fn derive_seed(seed: u64, stream: u64) -> u64 {
        // splitmix64 finalizer over the pair
        let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.inner.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (self.inner.next_u64() >> 11) as f64 * TWO_POW_M53;
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normal_image<T: Scalar>(&mut self, height: usize, width: usize) -> RealImage<T> {
        let data = (0..height * width).map(|_| T::lit(self.normal())).collect();
        RealImage::from_raw(height, width, data)
    }

    /// Two real draws per entry, real part first. Each part has unit variance.
    pub fn normal_complex_image<T: Scalar>(&mut self, height: usize, width: usize) -> ComplexImage<T> {
        let data = (0..height * width)
            .map(|_| {
                let re = self.normal();
                let im = self.normal();
                Complex::new(T::lit(re), T::lit(im))
            })
            .collect();
        ComplexImage::from_raw(height, width, data)
    }
}
