use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::scalar::Scalar;

/// Approximation of `grad_x log p_sigma(x)` for the crop-sized image prior.
pub trait ScoreFunction<T: Scalar>: Send + Sync {
    fn score(&self, x: &RealImage<T>, sigma: T) -> Result<RealImage<T>>;

    /// Expected input shape, if fixed.
    fn shape(&self) -> Option<(usize, usize)> {
        None
    }
}

impl<T: Scalar, S: ScoreFunction<T> + ?Sized> ScoreFunction<T> for &S {
    fn score(&self, x: &RealImage<T>, sigma: T) -> Result<RealImage<T>> {
        (**self).score(x, sigma)
    }

    fn shape(&self) -> Option<(usize, usize)> {
        (**self).shape()
    }
}

impl<T: Scalar, S: ScoreFunction<T> + ?Sized> ScoreFunction<T> for Box<S> {
    fn score(&self, x: &RealImage<T>, sigma: T) -> Result<RealImage<T>> {
        (**self).score(x, sigma)
    }

    fn shape(&self) -> Option<(usize, usize)> {
        (**self).shape()
    }
}

fn check_shape<T: Scalar>(expected: (usize, usize), x: &RealImage<T>) -> Result<()> {
    if x.shape() != expected {
        return Err(Error::shape(format!("score expects {expected:?}, got {:?}", x.shape())));
    }
    Ok(())
}

fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if !(sigma > T::zero() && sigma.is_finite()) {
        return Err(Error::domain(format!("noise level must be positive, got {sigma}")));
    }
    Ok(())
}

/// Exact score of an independent per-pixel Gaussian prior `N(m, diag(v))`
/// perturbed by `N(0, sigma^2 I)`: `-(x - m) / (v + sigma^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPriorScore<T> {
    mean: RealImage<T>,
    var: RealImage<T>,
}

impl<T: Scalar> GaussianPriorScore<T> {
    pub fn new(mean: RealImage<T>, var: RealImage<T>) -> Result<Self> {
        if mean.shape() != var.shape() {
            return Err(Error::shape(format!("mean {:?} vs variance {:?}", mean.shape(), var.shape())));
        }
        if !mean.is_finite() || var.as_slice().iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(Error::domain("prior mean must be finite and variances positive"));
        }
        Ok(Self { mean, var })
    }

    pub fn mean(&self) -> &RealImage<T> {
        &self.mean
    }

    pub fn var(&self) -> &RealImage<T> {
        &self.var
    }
}

impl<T: Scalar> ScoreFunction<T> for GaussianPriorScore<T> {
    fn score(&self, x: &RealImage<T>, sigma: T) -> Result<RealImage<T>> {
        check_shape(self.mean.shape(), x)?;
        check_sigma(sigma)?;
        let s2 = sigma * sigma;
        let data = x
            .as_slice()
            .iter()
            .zip(self.mean.as_slice())
            .zip(self.var.as_slice())
            .map(|((&x, &m), &v)| -(x - m) / (v + s2))
            .collect();
        RealImage::new(x.height(), x.width(), data)
    }

    fn shape(&self) -> Option<(usize, usize)> {
        Some(self.mean.shape())
    }
}

/// Exact score of a finite mixture of diagonal Gaussians, each perturbed by
/// `N(0, sigma^2 I)`. Responsibilities use a log-sum-exp so that
/// well-separated components at small `sigma` stay finite.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixtureScore<T> {
    log_weights: Vec<T>,
    components: Vec<GaussianPriorScore<T>>,
}

impl<T: Scalar> GaussianMixtureScore<T> {
    pub fn new(weights: Vec<T>, components: Vec<GaussianPriorScore<T>>) -> Result<Self> {
        if components.is_empty() || weights.len() != components.len() {
            return Err(Error::domain(format!(
                "mixture needs one weight per component, got {} and {}",
                weights.len(),
                components.len()
            )));
        }
        let shape = components[0].mean.shape();
        if components.iter().any(|c| c.mean.shape() != shape) {
            return Err(Error::shape("mixture components differ in shape"));
        }
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::domain("mixture weights must be positive"));
        }
        let total: T = weights.iter().copied().sum();
        let log_weights = weights.iter().map(|w| (*w / total).ln()).collect();
        Ok(Self { log_weights, components })
    }

    /// Equal weights.
    pub fn uniform(components: Vec<GaussianPriorScore<T>>) -> Result<Self> {
        let w = vec![T::one(); components.len()];
        Self::new(w, components)
    }

    pub fn components(&self) -> &[GaussianPriorScore<T>] {
        &self.components
    }

    /// Posterior component probabilities of `x` under the perturbed mixture.
    pub fn responsibilities(&self, x: &RealImage<T>, sigma: T) -> Result<Vec<T>> {
        check_shape(self.components[0].mean.shape(), x)?;
        check_sigma(sigma)?;
        let s2 = sigma * sigma;
        let two_pi = T::lit(2.0 * std::f64::consts::PI);
        let half = T::lit(0.5);
        let logp: Vec<T> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, &lw)| {
                let q: T = x
                    .as_slice()
                    .iter()
                    .zip(c.mean.as_slice())
                    .zip(c.var.as_slice())
                    .map(|((&x, &m), &v)| {
                        let s = v + s2;
                        (x - m) * (x - m) / s + (two_pi * s).ln()
                    })
                    .sum();
                lw - half * q
            })
            .collect();
        let top = logp.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = logp.iter().map(|l| (*l - top).exp()).collect();
        let z: T = e.iter().copied().sum();
        Ok(e.into_iter().map(|v| v / z).collect())
    }
}

impl<T: Scalar> ScoreFunction<T> for GaussianMixtureScore<T> {
    fn score(&self, x: &RealImage<T>, sigma: T) -> Result<RealImage<T>> {
        let resp = self.responsibilities(x, sigma)?;
        let mut out = RealImage::zeros(x.height(), x.width());
        for (c, r) in self.components.iter().zip(resp) {
            if r > T::zero() {
                out = out.axpy(r, &c.score(x, sigma)?);
            }
        }
        Ok(out)
    }

    fn shape(&self) -> Option<(usize, usize)> {
        Some(self.components[0].mean.shape())
    }
}

/// Always returns zero; turns the sampler into pure data consistency plus
/// noise. Mostly useful for tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ZeroScore;

impl<T: Scalar> ScoreFunction<T> for ZeroScore {
    fn score(&self, x: &RealImage<T>, _sigma: T) -> Result<RealImage<T>> {
        Ok(RealImage::zeros(x.height(), x.width()))
    }
}
