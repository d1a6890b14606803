//! Multi-coil acquisition operator and its derivatives.
//!
//! For an image `x` and coil maps `c_1..c_C` the operator is
//!
//! ```text
//! A(x, S)_j = M F (c_j x / rss(S))
//! ```
//!
//! with `F` the centered unitary DFT and `M` the sampling mask. The data term
//! is `D(x, S) = |A(x, S) - y|^2 / 2`. Because `c_j / rss(S)` is invariant
//! under `S -> g S`, so are `A`, `D` and the image gradient.


use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::image::{apply_mask, CoilSet, ComplexImage, KSpaceData, RealImage, SamplingMask};
use crate::scalar::Scalar;

/// Lower bound applied to the RSS map before any division by it.
pub const RSS_FLOOR: f64 = 1e-6;

/// Pointwise root-sum-of-squares `sqrt(sum_j |c_j|^2)`.
pub fn rss<T: Scalar>(coils: &CoilSet<T>) -> RealImage<T> {
    let (h, w) = coils.shape();
    let mut acc = vec![T::zero(); h * w];
    for c in coils.iter() {
        for (a, v) in acc.iter_mut().zip(c.as_slice()) {
            *a = *a + v.norm_sqr();
        }
    }
    RealImage::from_raw(h, w, acc.into_iter().map(|v| v.sqrt()).collect())
}

pub(crate) fn rss_of<T: Scalar>(images: &[ComplexImage<T>]) -> RealImage<T> {
    let (h, w) = images[0].shape();
    let mut acc = vec![T::zero(); h * w];
    for c in images {
        for (a, v) in acc.iter_mut().zip(c.as_slice()) {
            *a = *a + v.norm_sqr();
        }
    }
    RealImage::from_raw(h, w, acc.into_iter().map(|v| v.sqrt()).collect())
}

/// RSS map clamped below at [`RSS_FLOOR`].
pub fn rss_floored<T: Scalar>(coils: &CoilSet<T>) -> RealImage<T> {
    let floor = T::lit(RSS_FLOOR);
    rss(coils).map(|v| v.max(floor))
}

/// k-space residual `A(x, S) - y`, one image per channel, zero off the mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSet<T> {
    pub channels: Vec<ComplexImage<T>>,
}

impl<T: Scalar> ResidualSet<T> {
    pub fn norm_sq(&self) -> T {
        self.channels.iter().map(ComplexImage::norm_sq).sum()
    }
}

/// The acquisition operator for one sampling mask.
#[derive(Clone, Debug)]
pub struct ForwardModel<T: Scalar> {
    fft: Fft2<T>,
    mask: SamplingMask,
}

impl<T: Scalar> ForwardModel<T> {
    pub fn new(mask: SamplingMask) -> Self {
        let (h, w) = mask.shape();
        Self { fft: Fft2::new(h, w), mask }
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    pub fn fft(&self) -> &Fft2<T> {
        &self.fft
    }

    /// `M F u`.
    pub fn fourier_sub(&self, u: &ComplexImage<T>) -> ComplexImage<T> {
        let mut k = self.fft.forward(u);
        apply_mask(&mut k, &self.mask);
        k
    }

    /// `F^-1 M k`, the adjoint of [`ForwardModel::fourier_sub`].
    pub fn fourier_sub_adjoint(&self, k: &ComplexImage<T>) -> ComplexImage<T> {
        let mut k = k.clone();
        apply_mask(&mut k, &self.mask);
        self.fft.inverse(&k)
    }

    fn check(&self, x: &RealImage<T>, coils: &CoilSet<T>) -> Result<()> {
        if x.shape() != self.shape() || coils.shape() != self.shape() {
            return Err(Error::shape(format!(
                "image {:?} / coils {:?} do not match mask {:?}",
                x.shape(),
                coils.shape(),
                self.shape()
            )));
        }
        Ok(())
    }

    fn check_data(&self, coils: &CoilSet<T>, y: &KSpaceData<T>) -> Result<()> {
        if y.shape() != self.shape() || y.coil_count() != coils.len() {
            return Err(Error::shape(format!(
                "data has {} channels of {:?}, coils {} of {:?}",
                y.coil_count(),
                y.shape(),
                coils.len(),
                coils.shape()
            )));
        }
        if y.mask() != &self.mask {
            return Err(Error::shape("data mask differs from operator mask"));
        }
        Ok(())
    }

    /// Normalized coil images `c_j x / rss(S)`.
    fn coil_images(&self, x: &RealImage<T>, coils: &CoilSet<T>, rho: &RealImage<T>) -> Vec<ComplexImage<T>> {
        coils
            .iter()
            .map(|c| {
                let data = c
                    .as_slice()
                    .iter()
                    .zip(x.as_slice())
                    .zip(rho.as_slice())
                    .map(|((&cv, &xv), &r)| cv * (xv / r))
                    .collect();
                ComplexImage::from_raw(c.height(), c.width(), data)
            })
            .collect()
    }

    pub fn forward(&self, x: &RealImage<T>, coils: &CoilSet<T>) -> Result<KSpaceData<T>> {
        self.check(x, coils)?;
        let rho = rss_floored(coils);
        let channels = self
            .coil_images(x, coils, &rho)
            .iter()
            .map(|u| self.fourier_sub(u))
            .collect();
        Ok(KSpaceData::from_raw(channels, self.mask.clone()))
    }

    /// Adjoint of `x -> A(x, S)` for fixed `S`:
    /// `Re(sum_j conj(c_j) F^-1 M r_j / rss(S))`.
    pub fn adjoint_lin(&self, r: &[ComplexImage<T>], coils: &CoilSet<T>) -> Result<RealImage<T>> {
        if r.len() != coils.len() || r.iter().any(|k| k.shape() != self.shape()) {
            return Err(Error::shape("adjoint input does not match coils"));
        }
        let rho = rss_floored(coils);
        let (h, w) = self.shape();
        let mut acc = vec![T::zero(); h * w];
        for (rj, cj) in r.iter().zip(coils.iter()) {
            let back = self.fourier_sub_adjoint(rj);
            for ((a, b), c) in acc.iter_mut().zip(back.as_slice()).zip(cj.as_slice()) {
                *a = *a + (c.conj() * b).re;
            }
        }
        for (a, &p) in acc.iter_mut().zip(rho.as_slice()) {
            *a = *a / p;
        }
        Ok(RealImage::from_raw(h, w, acc))
    }

    pub fn residual(&self, x: &RealImage<T>, coils: &CoilSet<T>, y: &KSpaceData<T>) -> Result<ResidualSet<T>> {
        self.check_data(coils, y)?;
        let pred = self.forward(x, coils)?;
        let channels = pred
            .channels()
            .iter()
            .zip(y.channels())
            .map(|(p, d)| {
                ComplexImage::from_raw(
                    p.height(),
                    p.width(),
                    p.as_slice().iter().zip(d.as_slice()).map(|(a, b)| a - b).collect(),
                )
            })
            .collect();
        Ok(ResidualSet { channels })
    }

    /// `|A(x, S) - y|^2 / 2`.
    pub fn data_fidelity(&self, x: &RealImage<T>, coils: &CoilSet<T>, y: &KSpaceData<T>) -> Result<T> {
        Ok(self.residual(x, coils, y)?.norm_sq() * T::lit(0.5))
    }

    /// Gradient of the data term with respect to the image.
    pub fn grad_image(&self, x: &RealImage<T>, coils: &CoilSet<T>, y: &KSpaceData<T>) -> Result<RealImage<T>> {
        let s = self.residual(x, coils, y)?;
        self.adjoint_lin(&s.channels, coils)
    }

    /// Gradient of the data term with respect to the coil maps, packaged as
    /// `dD/dRe(c_j) + i dD/dIm(c_j)`.
    ///
    /// With `w_j = F^-1 s_j`, `rho = rss(S)` and
    /// `beta = sum_k Re(conj(c_k) w_k)`:
    ///
    /// ```text
    /// g_j = x w_j / rho - x beta c_j / rho^3
    /// ```
    ///
    /// The second term comes from differentiating the shared RSS
    /// denominator and couples all channels. Where the RSS floor is active
    /// the denominator is constant and only the first term remains.
    pub fn grad_coils(&self, x: &RealImage<T>, coils: &CoilSet<T>, y: &KSpaceData<T>) -> Result<CoilSet<T>> {
        let s = self.residual(x, coils, y)?;
        let back: Vec<ComplexImage<T>> = s.channels.iter().map(|k| self.fft.inverse(k)).collect();
        let raw = rss(coils);
        let floor = T::lit(RSS_FLOOR);
        let (h, w) = self.shape();
        let n = h * w;

        let mut beta = vec![T::zero(); n];
        for (wj, cj) in back.iter().zip(coils.iter()) {
            for ((b, wv), cv) in beta.iter_mut().zip(wj.as_slice()).zip(cj.as_slice()) {
                *b = *b + cv.re * wv.re + cv.im * wv.im;
            }
        }

        let grads = back
            .iter()
            .zip(coils.iter())
            .map(|(wj, cj)| {
                let data = (0..n)
                    .map(|p| {
                        let xv = x.as_slice()[p];
                        let r = raw.as_slice()[p];
                        if r > floor {
                            let first = wj.as_slice()[p] * (xv / r);
                            let second = cj.as_slice()[p] * (xv * beta[p] / (r * r * r));
                            first - second
                        } else {
                            wj.as_slice()[p] * (xv / floor)
                        }
                    })
                    .collect();
                ComplexImage::from_raw(h, w, data)
            })
            .collect();
        CoilSet::new(grads)
    }

    /// Zero-filled coil images `F^-1(y_j)`.
    pub fn zero_filled(&self, y: &KSpaceData<T>) -> Vec<ComplexImage<T>> {
        y.channels().iter().map(|k| self.fft.inverse(k)).collect()
    }
}

/// Inverse DFT of every channel of `y` combined by RSS.
pub fn zero_filled_rss<T: Scalar>(fft: &Fft2<T>, y: &KSpaceData<T>) -> RealImage<T> {
    let images: Vec<ComplexImage<T>> = y.channels().iter().map(|k| fft.inverse(k)).collect();
    rss_of(&images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use num_complex::Complex;

    fn czero<T: Scalar>() -> Complex<T> {
        Complex::new(T::zero(), T::zero())
    }

    fn random_coils(rng: &mut Rng, c: usize, h: usize, w: usize) -> CoilSet<f64> {
        CoilSet::new((0..c).map(|_| rng.normal_complex_image(h, w)).collect()).unwrap()
    }

    fn half_mask(rng: &mut Rng, h: usize, w: usize) -> SamplingMask {
        SamplingMask::from_fn(h, w, |_, _| rng.uniform() < 0.5).unwrap()
    }

    #[test]
    fn rss_examples() {
        let one = CoilSet::new(vec![ComplexImage::from_fn(3, 3, |_, _| Complex::new(1.0, 0.0)).unwrap()]).unwrap();
        assert!(rss(&one).as_slice().iter().all(|&v| v == 1.0));
        let two: CoilSet<f64> = CoilSet::new(vec![
            ComplexImage::from_fn(2, 2, |_, _| Complex::new(3.0, 0.0)).unwrap(),
            ComplexImage::from_fn(2, 2, |_, _| Complex::new(0.0, 4.0)).unwrap(),
        ])
        .unwrap();
        assert!(rss(&two).as_slice().iter().all(|&v| (v - 5.0).abs() < 1e-15));

        let mut rng = Rng::new(2);
        let coils = random_coils(&mut rng, 2, 4, 4);
        let r = rss(&coils);
        for p in 0..16 {
            let a = coils.coil(0).as_slice()[p];
            let b = coils.coil(1).as_slice()[p];
            let brute = (a.re * a.re + a.im * a.im + b.re * b.re + b.im * b.im).sqrt();
            assert!((r.as_slice()[p] - brute).abs() < 1e-14);
        }
    }

    #[test]
    fn masked_transform_is_contraction() {
        let mut rng = Rng::new(4);
        let mask = half_mask(&mut rng, 8, 6);
        let model = ForwardModel::<f64>::new(mask.clone());
        let u = rng.normal_complex_image(8, 6);
        let k = model.fourier_sub(&u);
        assert!(k.norm_sq() <= u.norm_sq());
        for (v, &s) in k.as_slice().iter().zip(mask.as_slice()) {
            if !s {
                assert_eq!(*v, czero());
            }
        }
        let full = ForwardModel::<f64>::new(SamplingMask::full(8, 6));
        let back = full.fourier_sub_adjoint(&full.fourier_sub(&u));
        for (a, b) in back.as_slice().iter().zip(u.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_unit_coil_reduces_to_dft() {
        let mut rng = Rng::new(5);
        let x: RealImage<f64> = rng.normal_image(6, 4);
        let coils = CoilSet::new(vec![ComplexImage::from_fn(6, 4, |_, _| Complex::new(1.0, 0.0)).unwrap()]).unwrap();
        let model = ForwardModel::new(SamplingMask::full(6, 4));
        let k = model.forward(&x, &coils).unwrap();
        let direct = model.fft().forward(&x.to_complex());
        for (a, b) in k.channel(0).as_slice().iter().zip(direct.as_slice()) {
            assert!((a - b).norm() < 1e-14);
        }
        let r = rng.normal_complex_image(6, 4);
        let adj = model.adjoint_lin(std::slice::from_ref(&r), &coils).unwrap();
        let direct = model.fft().inverse(&r).re();
        for (a, b) in adj.as_slice().iter().zip(direct.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_matches_direct_composition() {
        let mut rng = Rng::new(6);
        let (h, w) = (5, 7);
        let x: RealImage<f64> = rng.normal_image(h, w);
        let coils = random_coils(&mut rng, 3, h, w);
        let mask = half_mask(&mut rng, h, w);
        let model = ForwardModel::new(mask.clone());
        let y = model.forward(&x, &coils).unwrap();
        let fft = Fft2::new(h, w);
        for j in 0..3 {
            let u = ComplexImage::from_fn(h, w, |r, c| {
                let rho: f64 = (0..3).map(|k| coils.coil(k).get(r, c).norm_sqr()).sum::<f64>().sqrt();
                coils.coil(j).get(r, c) * x.get(r, c) / rho
            })
            .unwrap();
            let k = fft.forward(&u);
            for r in 0..h {
                for c in 0..w {
                    let expect = if mask.get(r, c) { k.get(r, c) } else { czero() };
                    assert!((y.channel(j).get(r, c) - expect).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn fidelity_values() {
        let mut rng = Rng::new(7);
        let (h, w) = (4, 4);
        let x: RealImage<f64> = rng.normal_image(h, w);
        let coils = random_coils(&mut rng, 2, h, w);
        let model = ForwardModel::new(SamplingMask::full(h, w));
        let y = model.forward(&x, &coils).unwrap();
        assert_eq!(model.data_fidelity(&x, &coils, &y).unwrap(), 0.0);
        assert!(model.grad_image(&x, &coils, &y).unwrap().max_abs() < 1e-14);

        // perturb data by e with |e|^2 = 2
        let mut ch = y.channels().to_vec();
        ch[0].as_mut_slice()[3] += Complex::new(1.0, 0.0);
        ch[1].as_mut_slice()[5] += Complex::new(0.0, -1.0);
        let y2 = KSpaceData::new(ch, y.mask().clone()).unwrap();
        assert!((model.data_fidelity(&x, &coils, &y2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_image_has_zero_coil_gradient() {
        let mut rng = Rng::new(8);
        let coils = random_coils(&mut rng, 3, 6, 5);
        let mask = half_mask(&mut rng, 6, 5);
        let model = ForwardModel::new(mask.clone());
        let y = KSpaceData::masked((0..3).map(|_| rng.normal_complex_image(6, 5)).collect(), mask).unwrap();
        let g = model.grad_coils(&RealImage::zeros(6, 5), &coils, &y).unwrap();
        assert_eq!(g.norm_sq(), 0.0);
    }

    #[test]
    fn floor_keeps_zero_coils_finite() {
        let model = ForwardModel::<f64>::new(SamplingMask::full(3, 3));
        let coils = CoilSet::zeros(2, 3, 3);
        let x = RealImage::filled(3, 3, 1.0);
        let y = model.forward(&x, &coils).unwrap();
        assert!(y.channels().iter().all(ComplexImage::is_finite));
        assert!(model.grad_coils(&x, &coils, &y).unwrap().is_finite());
    }
}
