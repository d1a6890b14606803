//! Forward-difference image gradient and its adjoint.
//!
//! `(D u)_row[r, c] = u[r + 1, c] - u[r, c]` for `r < h - 1`, zero on the
//! last row; columns likewise. `D^T D` is then the discrete Laplacian with
//! reflecting (Neumann) boundaries.

use crate::image::{CoilSet, RealImage};
use crate::scalar::Scalar;

/// Row- and column-direction differences.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<T> {
    pub rows: RealImage<T>,
    pub cols: RealImage<T>,
}

pub fn gradient<T: Scalar>(u: &RealImage<T>) -> Gradient<T> {
    let (h, w) = u.shape();
    let d = u.as_slice();
    let mut gr = vec![T::zero(); h * w];
    let mut gc = vec![T::zero(); h * w];
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            if r + 1 < h {
                gr[p] = d[p + w] - d[p];
            }
            if c + 1 < w {
                gc[p] = d[p + 1] - d[p];
            }
        }
    }
    Gradient { rows: RealImage::from_raw(h, w, gr), cols: RealImage::from_raw(h, w, gc) }
}

/// `D^T`, i.e. minus the discrete divergence.
pub fn gradient_adjoint<T: Scalar>(g: &Gradient<T>) -> RealImage<T> {
    let (h, w) = g.rows.shape();
    let pr = g.rows.as_slice();
    let pc = g.cols.as_slice();
    let mut out = vec![T::zero(); h * w];
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let mut v = T::zero();
            if r + 1 < h {
                v = v - pr[p];
            }
            if r > 0 {
                v = v + pr[p - w];
            }
            if c + 1 < w {
                v = v - pc[p];
            }
            if c > 0 {
                v = v + pc[p - 1];
            }
            out[p] = v;
        }
    }
    RealImage::from_raw(h, w, out)
}

/// `|D u|^2 / 2`.
pub fn quadratic_energy<T: Scalar>(u: &RealImage<T>) -> T {
    let g = gradient(u);
    (g.rows.norm_sq() + g.cols.norm_sq()) * T::lit(0.5)
}

/// Sum over coils of the quadratic gradient penalty of the real and
/// imaginary parts.
pub fn coil_smoothness<T: Scalar>(coils: &CoilSet<T>) -> T {
    coils.iter().map(|c| quadratic_energy(&c.re()) + quadratic_energy(&c.im())).sum()
}
