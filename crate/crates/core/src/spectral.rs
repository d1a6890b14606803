//! Orthonormal cosine and sine transforms that diagonalize the discrete
//! Laplacian, computed through FFTs of the symmetric/antisymmetric
//! extension.
//!
//! * DCT-II (inverse DCT-III) diagonalizes `D^T D` for the forward-difference
//!   gradient of [`crate::finite_diff`] (reflecting boundary). Per-axis
//!   eigenvalues `2 - 2 cos(pi i / n)`, `i = 0..n`.
//! * DST-I (self-inverse) diagonalizes the Laplacian with zero values just
//!   outside the grid. Per-axis eigenvalues `2 - 2 cos(pi (i + 1) / (n + 1))`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::image::RealImage;
use crate::scalar::Scalar;

/// Boundary condition of the Laplacian being diagonalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Reflecting boundary, DCT-II basis. Contains the constant mode.
    #[default]
    Neumann,
    /// Zero boundary, DST-I basis.
    Dirichlet,
}

impl Boundary {
    /// Eigenvalues of the 1-D second-difference operator of length `n`,
    /// in increasing order.
    pub fn eigenvalues(self, n: usize) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        match self {
            Boundary::Neumann => (0..n).map(|i| 2.0 - 2.0 * (pi * i as f64 / n as f64).cos()).collect(),
            Boundary::Dirichlet => (0..n)
                .map(|i| 2.0 - 2.0 * (pi * (i + 1) as f64 / (n + 1) as f64).cos())
                .collect(),
        }
    }
}

/// 1-D orthonormal transform of fixed length.
#[derive(Clone)]
struct Plan1<T: Scalar> {
    n: usize,
    boundary: Boundary,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    // DCT: e^{-i pi k / 2n}
    twiddle: Vec<Complex<T>>,
}

impl<T: Scalar> Plan1<T> {
    fn new(n: usize, boundary: Boundary, planner: &mut FftPlanner<T>) -> Self {
        let m = match boundary {
            Boundary::Neumann => 2 * n,
            Boundary::Dirichlet => 2 * (n + 1),
        };
        let twiddle = (0..n)
            .map(|k| {
                let a = -std::f64::consts::PI * k as f64 / (2 * n) as f64;
                Complex::new(T::lit(a.cos()), T::lit(a.sin()))
            })
            .collect();
        Self { n, boundary, fwd: planner.plan_fft_forward(m), inv: planner.plan_fft_inverse(m), twiddle }
    }

    fn forward(&self, x: &[T], out: &mut [T], buf: &mut Vec<Complex<T>>) {
        let n = self.n;
        let zero = Complex::new(T::zero(), T::zero());
        match self.boundary {
            Boundary::Neumann => {
                buf.clear();
                buf.extend(x.iter().map(|&v| Complex::new(v, T::zero())));
                buf.extend(x.iter().rev().map(|&v| Complex::new(v, T::zero())));
                self.fwd.process(buf);
                let s0 = T::one() / T::from_usize_lossy(n).sqrt();
                let s = T::lit(2.0).sqrt() * s0;
                let half = T::lit(0.5);
                for k in 0..n {
                    let c = (self.twiddle[k] * buf[k]).re * half;
                    out[k] = c * if k == 0 { s0 } else { s };
                }
            }
            Boundary::Dirichlet => {
                let big = 2 * (n + 1);
                buf.clear();
                buf.resize(big, zero);
                for j in 0..n {
                    buf[j + 1] = Complex::new(x[j], T::zero());
                    buf[big - 1 - j] = Complex::new(-x[j], T::zero());
                }
                self.fwd.process(buf);
                let s = (T::lit(2.0) / T::from_usize_lossy(n + 1)).sqrt() * T::lit(-0.5);
                for k in 0..n {
                    out[k] = buf[k + 1].im * s;
                }
            }
        }
    }

    fn inverse(&self, x: &[T], out: &mut [T], buf: &mut Vec<Complex<T>>) {
        match self.boundary {
            // DST-I is symmetric and orthogonal, hence its own inverse.
            Boundary::Dirichlet => self.forward(x, out, buf),
            Boundary::Neumann => {
                let n = self.n;
                let s0 = T::one() / T::from_usize_lossy(n).sqrt();
                let s = T::lit(2.0).sqrt() * s0;
                buf.clear();
                buf.resize(2 * n, Complex::new(T::zero(), T::zero()));
                for k in 0..n {
                    let scale = if k == 0 { s0 } else { s };
                    buf[k] = self.twiddle[k].conj() * (x[k] * scale);
                }
                self.inv.process(buf);
                for j in 0..n {
                    out[j] = buf[j].re;
                }
            }
        }
    }
}

/// Separable 2-D transform for one grid shape and boundary type.
#[derive(Clone)]
pub struct LaplaceTransform<T: Scalar> {
    height: usize,
    width: usize,
    boundary: Boundary,
    rows: Plan1<T>,
    cols: Plan1<T>,
    row_eig: Vec<T>,
    col_eig: Vec<T>,
}

impl<T: Scalar> fmt::Debug for LaplaceTransform<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LaplaceTransform")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("boundary", &self.boundary)
            .finish()
    }
}

impl<T: Scalar> LaplaceTransform<T> {
    pub fn new(height: usize, width: usize, boundary: Boundary) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            boundary,
            // `rows` transforms along a row (length = width)
            rows: Plan1::new(width, boundary, &mut planner),
            cols: Plan1::new(height, boundary, &mut planner),
            row_eig: boundary.eigenvalues(height).into_iter().map(T::lit).collect(),
            col_eig: boundary.eigenvalues(width).into_iter().map(T::lit).collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Eigenvalues along the vertical axis (indexed by row frequency).
    pub fn row_eigenvalues(&self) -> &[T] {
        &self.row_eig
    }

    /// Eigenvalues along the horizontal axis (indexed by column frequency).
    pub fn col_eigenvalues(&self) -> &[T] {
        &self.col_eig
    }

    /// Eigenvalue of the 2-D Laplacian for coefficient `(i, j)`.
    #[inline]
    pub fn eigenvalue(&self, i: usize, j: usize) -> T {
        self.row_eig[i] + self.col_eig[j]
    }

    pub fn forward(&self, u: &RealImage<T>) -> RealImage<T> {
        self.apply(u, false)
    }

    pub fn inverse(&self, u: &RealImage<T>) -> RealImage<T> {
        self.apply(u, true)
    }

    fn apply(&self, u: &RealImage<T>, inverse: bool) -> RealImage<T> {
        assert_eq!(u.shape(), self.shape(), "transform shape mismatch");
        let (h, w) = self.shape();
        let mut buf = Vec::new();
        let mut stage = vec![T::zero(); h * w];
        for r in 0..h {
            let src = &u.as_slice()[r * w..(r + 1) * w];
            let dst = &mut stage[r * w..(r + 1) * w];
            if inverse {
                self.rows.inverse(src, dst, &mut buf);
            } else {
                self.rows.forward(src, dst, &mut buf);
            }
        }
        let mut col_in = vec![T::zero(); h];
        let mut col_out = vec![T::zero(); h];
        for c in 0..w {
            for r in 0..h {
                col_in[r] = stage[r * w + c];
            }
            if inverse {
                self.cols.inverse(&col_in, &mut col_out, &mut buf);
            } else {
                self.cols.forward(&col_in, &mut col_out, &mut buf);
            }
            for r in 0..h {
                stage[r * w + c] = col_out[r];
            }
        }
        RealImage::from_raw(h, w, stage)
    }
}

/// Orthonormal 2-D DST-I.
pub fn dst2<T: Scalar>(u: &RealImage<T>) -> RealImage<T> {
    LaplaceTransform::new(u.height(), u.width(), Boundary::Dirichlet).forward(u)
}

/// Inverse of [`dst2`] (which is the same map).
pub fn idst2<T: Scalar>(u: &RealImage<T>) -> RealImage<T> {
    LaplaceTransform::new(u.height(), u.width(), Boundary::Dirichlet).inverse(u)
}

/// Orthonormal 2-D DCT-II.
pub fn dct2<T: Scalar>(u: &RealImage<T>) -> RealImage<T> {
    LaplaceTransform::new(u.height(), u.width(), Boundary::Neumann).forward(u)
}

/// Inverse of [`dct2`] (orthonormal DCT-III).
pub fn idct2<T: Scalar>(u: &RealImage<T>) -> RealImage<T> {
    LaplaceTransform::new(u.height(), u.width(), Boundary::Neumann).inverse(u)
}
