//! Smoothness prior on coil maps and the coil update of the sampler.
//!
//! The smoother `Q_mu` multiplies transform coefficient `(i, j)` by
//! `mu / (xi_i + xi_j + mu)`, where `xi` are the per-axis Laplacian
//! eigenvalues of the chosen [`Boundary`]. This is the solution operator of
//! `(I + L / mu) v = u`, i.e. the proximal map of `v -> |D v|^2 / 2` with
//! weight `1 / mu`. Larger `mu` smooths less.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward_model::{rss_of, ForwardModel, RSS_FLOOR};
use crate::image::{CoilSet, ComplexImage, KSpaceData, RealImage};
use crate::scalar::Scalar;
use crate::spectral::{Boundary, LaplaceTransform};

/// Precomputed transform and eigenvalues for smoothing on one grid.
#[derive(Clone, Debug)]
pub struct SmoothingPlan<T: Scalar> {
    transform: LaplaceTransform<T>,
}

impl<T: Scalar> SmoothingPlan<T> {
    pub fn new(height: usize, width: usize, boundary: Boundary) -> Self {
        Self { transform: LaplaceTransform::new(height, width, boundary) }
    }

    pub fn transform(&self) -> &LaplaceTransform<T> {
        &self.transform
    }

    pub fn shape(&self) -> (usize, usize) {
        self.transform.shape()
    }

    /// `Q_mu(u)`.
    pub fn smooth_q(&self, u: &RealImage<T>, mu: T) -> Result<RealImage<T>> {
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::domain(format!("smoothing parameter must be positive, got {mu}")));
        }
        if u.shape() != self.shape() {
            return Err(Error::shape(format!("smoothing plan is {:?}, input {:?}", self.shape(), u.shape())));
        }
        let mut coeff = self.transform.forward(u);
        let w = u.width();
        for (p, v) in coeff.as_mut_slice().iter_mut().enumerate() {
            let (i, j) = (p / w, p % w);
            *v = *v * (mu / (self.transform.eigenvalue(i, j) + mu));
        }
        Ok(self.transform.inverse(&coeff))
    }

    /// Applies [`SmoothingPlan::smooth_q`] to the real and imaginary part of
    /// every coil independently.
    pub fn prox_coils(&self, coils: &CoilSet<T>, mu: T) -> Result<CoilSet<T>> {
        let smoothed = coils
            .iter()
            .map(|c| {
                let re = self.smooth_q(&c.re(), mu)?;
                let im = self.smooth_q(&c.im(), mu)?;
                ComplexImage::from_parts(&re, &im)
            })
            .collect::<Result<Vec<_>>>()?;
        CoilSet::new(smoothed)
    }

    /// One proximal-gradient step on the coils:
    /// `prox(S - mu grad_S D(x, S), mu)`.
    pub fn coil_update(
        &self,
        model: &ForwardModel<T>,
        x: &RealImage<T>,
        coils: &CoilSet<T>,
        y: &KSpaceData<T>,
        mu: T,
    ) -> Result<CoilSet<T>> {
        let grad = model.grad_coils(x, coils, y)?;
        self.prox_coils(&coils.axpy(-mu, &grad), mu)
    }
}

/// Global rescaling applied after the pointwise zero-filled initialization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoilNormalization {
    /// Divide by the squared 2-norm of the whole stack.
    #[default]
    SquaredNorm,
    /// Divide by the 2-norm.
    Norm,
    /// Keep the pointwise-normalized maps (RSS one wherever data is nonzero).
    None,
}

/// Zero-filled coil estimate `F^-1(y_j) / rss_j(F^-1 y)` before global
/// normalization.
pub fn zf_coil_maps<T: Scalar>(model: &ForwardModel<T>, y: &KSpaceData<T>) -> Result<CoilSet<T>> {
    if y.norm_sq() == T::zero() {
        return Err(Error::domain("cannot initialize coils from all-zero data"));
    }
    let images = model.zero_filled(y);
    let floor = T::lit(RSS_FLOOR);
    let rho = rss_of(&images).map(|v| v.max(floor));
    let coils = images
        .iter()
        .map(|z| {
            ComplexImage::new(
                z.height(),
                z.width(),
                z.as_slice().iter().zip(rho.as_slice()).map(|(&v, &r)| v / r).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    CoilSet::new(coils)
}

/// Zero-filled initialization followed by the global normalization.
pub fn zf_coil_init<T: Scalar>(
    model: &ForwardModel<T>,
    y: &KSpaceData<T>,
    normalization: CoilNormalization,
) -> Result<CoilSet<T>> {
    let maps = zf_coil_maps(model, y)?;
    let norm_sq = maps.norm_sq();
    Ok(match normalization {
        CoilNormalization::SquaredNorm => maps.scaled(T::one() / norm_sq),
        CoilNormalization::Norm => maps.scaled(T::one() / norm_sq.sqrt()),
        CoilNormalization::None => maps,
    })
}
