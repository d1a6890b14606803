//! Unitary 2-D DFT with centered k-space.
//!
//! `forward(x) = fftshift(F x) / sqrt(n)` and `inverse` is its exact inverse
//! (and adjoint), so zero frequency sits at `(h / 2, w / 2)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::image::ComplexImage;
use crate::scalar::Scalar;

#[derive(Clone)]
pub struct Fft2<T: Scalar> {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Scalar> fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2").field("height", &self.height).field("width", &self.width).finish()
    }
}

impl<T: Scalar> Fft2<T> {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            scale: T::one() / T::from_usize_lossy(height * width).sqrt(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Image to centered k-space.
    pub fn forward(&self, x: &ComplexImage<T>) -> ComplexImage<T> {
        assert_eq!(x.shape(), self.shape(), "fft shape mismatch");
        let mut buf = x.as_slice().to_vec();
        self.transform(&mut buf, &self.row_fwd, &self.col_fwd);
        let shifted = roll2(&buf, self.height, self.width, self.height / 2, self.width / 2);
        ComplexImage::from_raw(self.height, self.width, shifted)
    }

    /// Centered k-space to image.
    pub fn inverse(&self, k: &ComplexImage<T>) -> ComplexImage<T> {
        assert_eq!(k.shape(), self.shape(), "fft shape mismatch");
        let mut buf = roll2(
            k.as_slice(),
            self.height,
            self.width,
            self.height - self.height / 2,
            self.width - self.width / 2,
        );
        self.transform(&mut buf, &self.row_inv, &self.col_inv);
        ComplexImage::from_raw(self.height, self.width, buf)
    }

    fn transform(&self, buf: &mut [Complex<T>], rows: &Arc<dyn Fft<T>>, cols: &Arc<dyn Fft<T>>) {
        let (h, w) = (self.height, self.width);
        rows.process(buf);
        let mut t = transpose(buf, h, w);
        cols.process(&mut t);
        let back = transpose(&t, w, h);
        for (dst, src) in buf.iter_mut().zip(back) {
            *dst = src * self.scale;
        }
    }
}

fn transpose<T: Copy>(src: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(src.len());
    for c in 0..w {
        for r in 0..h {
            out.push(src[r * w + c]);
        }
    }
    out
}

/// Circular shift: `out[(r + dr) % h][(c + dc) % w] = src[r][c]`.
fn roll2<T: Copy + Default>(src: &[T], h: usize, w: usize, dr: usize, dc: usize) -> Vec<T> {
    let mut out = vec![T::default(); src.len()];
    for r in 0..h {
        let rr = (r + dr) % h;
        for c in 0..w {
            out[rr * w + (c + dc) % w] = src[r * w + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn naive_dft(x: &ComplexImage<f64>) -> ComplexImage<f64> {
        let (h, w) = x.shape();
        let n = (h * w) as f64;
        ComplexImage::from_fn(h, w, |kr, kc| {
            // centered index -> frequency
            let fr = (kr as isize - (h / 2) as isize) as f64;
            let fc = (kc as isize - (w / 2) as isize) as f64;
            let mut acc = Complex::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let ph = -2.0 * std::f64::consts::PI * (fr * r as f64 / h as f64 + fc * c as f64 / w as f64);
                    acc += x.get(r, c) * Complex::from_polar(1.0, ph);
                }
            }
            acc / n.sqrt()
        })
        .unwrap()
    }

    #[test]
    fn matches_naive_dft_odd_and_even() {
        for &(h, w) in &[(4, 6), (5, 3), (7, 8)] {
            let x: ComplexImage<f64> = Rng::new(h as u64).normal_complex_image(h, w);
            let f = Fft2::new(h, w);
            let fast = f.forward(&x);
            let slow = naive_dft(&x);
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                assert!((a - b).norm() < 1e-12);
            }
            let back = f.inverse(&fast);
            for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let (h, w) = (6, 4);
        let mut x = ComplexImage::<f64>::zeros(h, w);
        x.as_mut_slice()[0] = Complex::new(1.0, 0.0);
        let k = Fft2::new(h, w).forward(&x);
        for v in k.as_slice() {
            assert!((v.norm() - 1.0 / ((h * w) as f64).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn dc_lands_in_center() {
        let x = ComplexImage::from_fn(5, 6, |_, _| Complex::new(1.0f64, 0.0)).unwrap();
        let k = Fft2::new(5, 6).forward(&x);
        assert!((k.get(2, 3).re - 30f64.sqrt()).abs() < 1e-12);
    }
}
