//! Sampling masks and a synthetic phantom / coil / k-space simulator.
//!
//! Masks are in the centered k-space layout used by [`crate::fft`]: the
//! zero frequency sits at `(H/2, W/2)`. Phase encoding runs along columns.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::diffusion::{GaussianMixtureScore, GaussianPriorScore};
use crate::error::{Error, Result};
use crate::forward_model::{rss, ForwardModel};
use crate::image::{CoilSet, ComplexImage, CropWindow, KSpaceData, RealImage, SamplingMask};
use crate::presets::PatternKind;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Center block of `round(acs_fraction * W)` columns plus every `R`-th
/// column from 0. With `swapped` the same pattern is laid out along rows.
pub fn cartesian_mask(shape: (usize, usize), acceleration: usize, acs_fraction: f64, swapped: bool) -> Result<SamplingMask> {
    if swapped {
        return Ok(cartesian_mask((shape.1, shape.0), acceleration, acs_fraction, false)?.transpose());
    }
    let (h, w) = shape;
    if acceleration == 0 {
        return Err(Error::domain("acceleration must be >= 1"));
    }
    if !(0.0..1.0).contains(&acs_fraction) {
        return Err(Error::domain(format!("acs fraction {acs_fraction} outside [0, 1)")));
    }
    let acs = (acs_fraction * w as f64).round() as usize;
    if acs > w {
        return Err(Error::domain(format!("{acs} calibration columns do not fit in width {w}")));
    }
    // centred on the DC column w / 2 of the centred spectrum
    let start = w / 2 - acs / 2;
    let cols: Vec<bool> = (0..w).map(|c| c % acceleration == 0 || (start..start + acs).contains(&c)).collect();
    SamplingMask::from_fn(h, w, |_, c| cols[c])
}

/// Weighted sampling without replacement (Efraimidis-Spirakis keys), which
/// is equivalent to sequential draws proportional to `weights`.
fn weighted_pick(weights: &[f64], taken: &mut [bool], count: usize, rng: &mut Rng) {
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| !taken[i])
        .map(|(i, &wt)| {
            let u = rng.uniform().max(f64::MIN_POSITIVE);
            (u.ln() / wt, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(_, i) in keys.iter().take(count) {
        taken[i] = true;
    }
}

fn center_block(n: usize, fraction: f64) -> std::ops::Range<usize> {
    let len = ((fraction * n as f64).round() as usize).max(1);
    let start = n / 2 - len / 2;
    start..start + len
}

/// Fraction of the grid always sampled around the center.
pub const GAUSSIAN_CENTER_FRACTION: f64 = 0.04;

/// Phase-encode columns drawn without replacement with probability
/// proportional to a centered Gaussian (std `W/6`), plus an always-on
/// center block, until `round(W/R)` columns are selected. With `two_d`,
/// individual k-space points are drawn from a 2-D Gaussian density
/// instead, until `round(H W / R)` points are selected.
pub fn gaussian_mask(shape: (usize, usize), acceleration: f64, seed: u64, two_d: bool) -> Result<SamplingMask> {
    let (h, w) = shape;
    if !(acceleration >= 1.0) || !acceleration.is_finite() {
        return Err(Error::domain(format!("acceleration {acceleration} must be >= 1")));
    }
    let mut rng = Rng::new(seed);
    let density = |i: usize, n: usize| {
        let d = i as f64 - (n / 2) as f64;
        let s = n as f64 / 6.0;
        (-0.5 * d * d / (s * s)).exp()
    };
    if !two_d {
        let target = (w as f64 / acceleration).round() as usize;
        let block = center_block(w, GAUSSIAN_CENTER_FRACTION);
        if target < block.len() || target == 0 {
            return Err(Error::domain(format!("cannot select {target} columns with a {}-column center block", block.len())));
        }
        let mut taken = vec![false; w];
        block.for_each(|c| taken[c] = true);
        let left = target - taken.iter().filter(|&&t| t).count();
        let weights: Vec<f64> = (0..w).map(|c| density(c, w)).collect();
        weighted_pick(&weights, &mut taken, left, &mut rng);
        SamplingMask::from_fn(h, w, |_, c| taken[c])
    } else {
        let target = ((h * w) as f64 / acceleration).round() as usize;
        let (br, bc) = (center_block(h, GAUSSIAN_CENTER_FRACTION), center_block(w, GAUSSIAN_CENTER_FRACTION));
        let mut taken = vec![false; h * w];
        for r in br.clone() {
            for c in bc.clone() {
                taken[r * w + c] = true;
            }
        }
        let have = br.len() * bc.len();
        if target < have || target == 0 {
            return Err(Error::domain(format!("cannot select {target} points with a {have}-point center block")));
        }
        let weights: Vec<f64> = (0..h * w).map(|p| density(p / w, h) * density(p % w, w)).collect();
        weighted_pick(&weights, &mut taken, target - have, &mut rng);
        SamplingMask::new(h, w, taken)
    }
}

/// Union of `spokes` lines through the k-space center at angles `k pi / S`.
/// Each line is rasterized with one grid point per step along its dominant
/// axis, rounding the other coordinate to the nearest grid point. Angle 0 is
/// the center row.
pub fn radial_mask(shape: (usize, usize), spokes: usize) -> Result<SamplingMask> {
    let (h, w) = shape;
    if spokes == 0 {
        return Err(Error::domain("need at least one spoke"));
    }
    let (cr, cc) = ((h / 2) as f64, (w / 2) as f64);
    let mut sel = vec![false; h * w];
    for k in 0..spokes {
        let theta = PI * k as f64 / spokes as f64;
        let (s, c) = theta.sin_cos();
        if c.abs() >= s.abs() {
            for col in 0..w {
                let t = (col as f64 - cc) / c;
                let r = (cr - t * s).round();
                if r >= 0.0 && (r as usize) < h {
                    sel[r as usize * w + col] = true;
                }
            }
        } else {
            for r in 0..h {
                let t = (cr - r as f64) / s;
                let col = (cc + t * c).round();
                if col >= 0.0 && (col as usize) < w {
                    sel[r * w + col as usize] = true;
                }
            }
        }
    }
    SamplingMask::new(h, w, sel)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSpec {
    Cartesian { acceleration: usize, acs_fraction: f64 },
    CartesianSwapped { acceleration: usize, acs_fraction: f64 },
    Gaussian {
        acceleration: f64,
        seed: u64,
        #[serde(default)]
        two_d: bool,
    },
    Radial { spokes: usize },
}

impl MaskSpec {
    /// 4x Cartesian with 8% calibration region.
    pub const CARTESIAN_4X: MaskSpec = MaskSpec::Cartesian { acceleration: 4, acs_fraction: 0.08 };
    pub const CARTESIAN_SWAPPED_4X: MaskSpec = MaskSpec::CartesianSwapped { acceleration: 4, acs_fraction: 0.08 };
    pub const GAUSSIAN_4X: MaskSpec = MaskSpec::Gaussian { acceleration: 4.0, seed: 0, two_d: false };
    pub const RADIAL_45: MaskSpec = MaskSpec::Radial { spokes: 45 };

    pub fn build(&self, shape: (usize, usize)) -> Result<SamplingMask> {
        match *self {
            MaskSpec::Cartesian { acceleration, acs_fraction } => cartesian_mask(shape, acceleration, acs_fraction, false),
            MaskSpec::CartesianSwapped { acceleration, acs_fraction } => cartesian_mask(shape, acceleration, acs_fraction, true),
            MaskSpec::Gaussian { acceleration, seed, two_d } => gaussian_mask(shape, acceleration, seed, two_d),
            MaskSpec::Radial { spokes } => radial_mask(shape, spokes),
        }
    }

    pub fn pattern(&self) -> PatternKind {
        match self {
            MaskSpec::Cartesian { .. } => PatternKind::Cartesian,
            MaskSpec::CartesianSwapped { .. } => PatternKind::CartesianSwapped,
            MaskSpec::Gaussian { .. } => PatternKind::Gaussian,
            MaskSpec::Radial { .. } => PatternKind::Radial,
        }
    }

    /// Short human-readable label, e.g. `cartesian-4x`.
    pub fn label(&self) -> String {
        match *self {
            MaskSpec::Cartesian { acceleration, .. } => format!("cartesian-{acceleration}x"),
            MaskSpec::CartesianSwapped { acceleration, .. } => format!("cartesian-swapped-{acceleration}x"),
            MaskSpec::Gaussian { acceleration, two_d, .. } => {
                format!("gaussian{}-{acceleration}x", if two_d { "2d" } else { "" })
            }
            MaskSpec::Radial { spokes } => format!("radial-{spokes}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub coils: usize,
    pub ellipses: usize,
    /// Width of the coil sensitivity bumps relative to the larger grid side.
    pub coil_smoothness: f64,
    /// Standard deviation of the complex k-space noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self { height: 128, width: 96, coils: 4, ellipses: 8, coil_smoothness: 0.5, noise_std: 0.0, seed: 0 }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::domain("phantom grid must be non-empty"));
        }
        if self.coils == 0 {
            return Err(Error::domain("coil count must be >= 1"));
        }
        if !(self.coil_smoothness > 0.0 && self.coil_smoothness.is_finite()) {
            return Err(Error::domain(format!("coil smoothness must be positive, got {}", self.coil_smoothness)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::domain(format!("noise std must be >= 0, got {}", self.noise_std)));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

// Independent random streams per product, so changing e.g. the coil count
// leaves the phantom unchanged.
const STREAM_PHANTOM: u64 = 1;
const STREAM_COILS: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Axis-aligned-in-its-own-frame ellipse with intensity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub angle: f64,
    pub intensity: f64,
}

impl Ellipse {
    fn random(h: usize, w: usize, rng: &mut Rng) -> Self {
        let (hf, wf) = (h as f64, w as f64);
        Ellipse {
            center: (rng.uniform_in(0.25, 0.75) * hf, rng.uniform_in(0.25, 0.75) * wf),
            axes: (rng.uniform_in(0.05, 0.3) * hf, rng.uniform_in(0.05, 0.3) * wf),
            angle: rng.uniform_in(0.0, PI),
            intensity: rng.uniform(),
        }
    }

    pub fn contains(&self, r: f64, c: f64) -> bool {
        let (s, co) = self.angle.sin_cos();
        let (dr, dc) = (r - self.center.0, c - self.center.1);
        let u = co * dr + s * dc;
        let v = -s * dr + co * dc;
        (u / self.axes.0).powi(2) + (v / self.axes.1).powi(2) <= 1.0
    }
}

/// Random ellipses of the phantom, in drawing order.
pub fn phantom_ellipses(spec: &PhantomSpec) -> Vec<Ellipse> {
    let mut rng = Rng::derive(spec.seed, STREAM_PHANTOM);
    (0..spec.ellipses).map(|_| Ellipse::random(spec.height, spec.width, &mut rng)).collect()
}

/// Rasterizes ellipses by summing their intensities and clipping to `[0, 1]`.
pub fn render_ellipses<T: Scalar>(shape: (usize, usize), ellipses: &[Ellipse]) -> RealImage<T> {
    let mut out = vec![T::zero(); shape.0 * shape.1];
    for (p, v) in out.iter_mut().enumerate() {
        let (r, c) = ((p / shape.1) as f64 + 0.5, (p % shape.1) as f64 + 0.5);
        let s: f64 = ellipses.iter().filter(|e| e.contains(r, c)).map(|e| e.intensity).sum();
        *v = T::lit(s.clamp(0.0, 1.0));
    }
    RealImage::new(shape.0, shape.1, out).expect("shape is consistent")
}

pub fn phantom_image<T: Scalar>(spec: &PhantomSpec) -> RealImage<T> {
    render_ellipses(spec.shape(), &phantom_ellipses(spec))
}

/// Smooth synthetic sensitivities: Gaussian magnitude bumps centered at `C`
/// equispaced points just outside the field of view, each with a random
/// linear phase, normalized so that the RSS is one everywhere. `smoothness`
/// is the bump width relative to the larger grid side.
pub fn synth_coils<T: Scalar>(shape: (usize, usize), count: usize, smoothness: f64, seed: u64) -> Result<CoilSet<T>> {
    let (h, w) = shape;
    if count == 0 {
        return Err(Error::domain("coil count must be >= 1"));
    }
    if !(smoothness > 0.0) {
        return Err(Error::domain("coil smoothness must be positive"));
    }
    let mut rng = Rng::derive(seed, STREAM_COILS);
    let (hf, wf) = (h as f64, w as f64);
    let width = smoothness * hf.max(wf);
    let raw: Vec<Vec<Complex<f64>>> = (0..count)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / count as f64 + rng.uniform_in(-0.1, 0.1);
            let (pr, pc) = (hf / 2.0 + 0.6 * hf * a.sin(), wf / 2.0 + 0.6 * wf * a.cos());
            let (fr, fc, off) = (rng.uniform_in(-0.5, 0.5), rng.uniform_in(-0.5, 0.5), rng.uniform_in(0.0, 2.0 * PI));
            (0..h * w)
                .map(|p| {
                    let (r, c) = ((p / w) as f64, (p % w) as f64);
                    let d2 = (r - pr).powi(2) + (c - pc).powi(2);
                    let mag = (-0.5 * d2 / (width * width)).exp();
                    let phase = off + 2.0 * PI * (fr * r / hf + fc * c / wf);
                    Complex::from_polar(mag, phase)
                })
                .collect()
        })
        .collect();
    let norm: Vec<f64> = (0..h * w).map(|p| raw.iter().map(|c| c[p].norm_sqr()).sum::<f64>().sqrt()).collect();
    let coils = raw
        .into_iter()
        .map(|c| {
            let data = c.into_iter().zip(&norm).map(|(v, &n)| Complex::new(T::lit(v.re / n), T::lit(v.im / n))).collect();
            ComplexImage::new(h, w, data)
        })
        .collect::<Result<Vec<_>>>()?;
    CoilSet::new(coils)
}

/// `A(x, coils)` plus i.i.d. circular complex Gaussian noise with
/// `E|e|^2 = noise_std^2` on the sampled entries.
pub fn simulate_kspace<T: Scalar>(
    x: &RealImage<T>,
    coils: &CoilSet<T>,
    mask: &SamplingMask,
    noise_std: f64,
    rng: &mut Rng,
) -> Result<KSpaceData<T>> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::domain(format!("noise std must be >= 0, got {noise_std}")));
    }
    let y = ForwardModel::new(mask.clone()).forward(x, coils)?;
    if noise_std == 0.0 {
        return Ok(y);
    }
    let s = noise_std / 2f64.sqrt();
    let channels = y
        .channels()
        .iter()
        .map(|ch| {
            let (h, w) = ch.shape();
            let data = ch
                .as_slice()
                .iter()
                .zip(mask.as_slice())
                .map(|(&v, &m)| {
                    if m {
                        v + Complex::new(T::lit(s * rng.normal()), T::lit(s * rng.normal()))
                    } else {
                        v
                    }
                })
                .collect();
            ComplexImage::new(h, w, data)
        })
        .collect::<Result<Vec<_>>>()?;
    KSpaceData::new(channels, mask.clone())
}

/// Everything the simulator produces for one case.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub image: RealImage<T>,
    pub coils: CoilSet<T>,
    pub mask: SamplingMask,
    /// Noiseless, fully sampled reference data.
    pub full: KSpaceData<T>,
    /// Noisy, sub-sampled measurements.
    pub measured: KSpaceData<T>,
}

pub fn simulate<T: Scalar>(spec: &PhantomSpec, mask: &MaskSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let image = phantom_image(spec);
    simulate_with_image(spec, mask, image)
}

/// Like [`simulate`] with a caller-supplied ground-truth image.
pub fn simulate_with_image<T: Scalar>(spec: &PhantomSpec, mask: &MaskSpec, image: RealImage<T>) -> Result<Dataset<T>> {
    spec.validate()?;
    if image.shape() != spec.shape() {
        return Err(Error::shape(format!("image {:?} vs spec {:?}", image.shape(), spec.shape())));
    }
    let coils = synth_coils(spec.shape(), spec.coils, spec.coil_smoothness, spec.seed)?;
    let mask = mask.build(spec.shape())?;
    let full = ForwardModel::new(SamplingMask::full(spec.height, spec.width)).forward(&image, &coils)?;
    let mut rng = Rng::derive(spec.seed, STREAM_NOISE);
    let measured = simulate_kspace(&image, &coils, &mask, spec.noise_std, &mut rng)?;
    debug_assert!(rss(&coils).as_slice().iter().all(|v| (v.as_f64() - 1.0).abs() < 1e-9));
    Ok(Dataset { image, coils, mask, full, measured })
}

/// Gaussian-mixture image prior whose component means are ellipse
/// phantoms. Its score is known in closed form, which makes it a stand-in
/// for a trained network in end-to-end checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixturePrior {
    pub components: usize,
    pub ellipses: usize,
    /// Per-pixel standard deviation relative to the mean intensity.
    pub texture: f64,
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for MixturePrior {
    fn default() -> Self {
        Self { components: 8, ellipses: 6, texture: 0.1, variance_floor: 1e-4, seed: 0 }
    }
}

const STREAM_MIXTURE: u64 = 4;

impl MixturePrior {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::domain("mixture needs at least one component"));
        }
        if !(self.texture >= 0.0 && self.texture.is_finite()) || !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::domain("mixture texture must be >= 0 and the variance floor positive"));
        }
        Ok(())
    }

    pub fn components<T: Scalar>(&self, shape: (usize, usize)) -> Result<Vec<GaussianPriorScore<T>>> {
        self.validate()?;
        (0..self.components as u64)
            .map(|k| {
                let spec = PhantomSpec {
                    height: shape.0,
                    width: shape.1,
                    ellipses: self.ellipses,
                    seed: Rng::derive_seed(Rng::derive_seed(self.seed, STREAM_MIXTURE), k),
                    ..PhantomSpec::default()
                };
                let mean: RealImage<T> = phantom_image(&spec);
                let (tau, floor) = (T::lit(self.texture), T::lit(self.variance_floor));
                let var = mean.map(|m| (tau * m) * (tau * m) + floor);
                GaussianPriorScore::new(mean, var)
            })
            .collect()
    }

    pub fn score<T: Scalar>(&self, shape: (usize, usize)) -> Result<GaussianMixtureScore<T>> {
        GaussianMixtureScore::uniform(self.components(shape)?)
    }

    /// Draws a component uniformly, then a sample from it clamped at zero.
    /// Returns the component index and the image.
    pub fn sample<T: Scalar>(&self, shape: (usize, usize), rng: &mut Rng) -> Result<(usize, RealImage<T>)> {
        let comps = self.components::<T>(shape)?;
        let k = rng.below(comps.len());
        let c = &comps[k];
        let z: RealImage<T> = rng.normal_image(shape.0, shape.1);
        let data = c
            .mean()
            .as_slice()
            .iter()
            .zip(c.var().as_slice())
            .zip(z.as_slice())
            .map(|((&m, &v), &z)| (m + v.sqrt() * z).max(T::zero()))
            .collect();
        Ok((k, RealImage::new(shape.0, shape.1, data)?))
    }
}

/// One case of the mixture-phantom suite: a prior sample inside the centered
/// `crop` window, zero elsewhere (the object fits in the field of view, as
/// with readout oversampling). The sample is drawn from `spec.seed`.
pub fn simulate_mixture<T: Scalar>(
    spec: &PhantomSpec,
    mask: &MaskSpec,
    prior: &MixturePrior,
    crop: (usize, usize),
) -> Result<Dataset<T>> {
    spec.validate()?;
    let window = CropWindow::new(spec.shape(), crop)?;
    let (_, sample) = prior.sample::<T>(crop, &mut Rng::derive(spec.seed, STREAM_MIXTURE))?;
    let image = window.pad(&sample, &RealImage::zeros(spec.height, spec.width))?;
    simulate_with_image(spec, mask, image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_diff::coil_smoothness;
    use crate::forward_model::zero_filled_rss;

    fn columns(m: &SamplingMask) -> Vec<usize> {
        (0..m.width()).filter(|&c| m.get(0, c)).collect()
    }

    #[test]
    fn cartesian_reference_case() {
        let m = cartesian_mask((8, 16), 4, 0.25, false).unwrap();
        assert_eq!(columns(&m), vec![0, 4, 6, 7, 8, 9, 12]);
        assert!((0..8).all(|r| columns(&m).iter().all(|&c| m.get(r, c))));
        assert_eq!(cartesian_mask((5, 7), 1, 0.0, false).unwrap(), SamplingMask::full(5, 7));
        let sq = cartesian_mask((16, 16), 4, 0.08, false).unwrap();
        assert_eq!(cartesian_mask((16, 16), 4, 0.08, true).unwrap(), sq.transpose());
        let rect = cartesian_mask((12, 20), 3, 0.1, true).unwrap();
        assert_eq!(rect.shape(), (12, 20));
        assert!(cartesian_mask((4, 4), 0, 0.1, false).is_err());
        assert!(cartesian_mask((4, 4), 2, 1.0, false).is_err());
    }

    #[test]
    fn gaussian_count_center_and_seeds() {
        let a = gaussian_mask((32, 96), 4.0, 1, false).unwrap();
        let b = gaussian_mask((32, 96), 4.0, 2, false).unwrap();
        assert_eq!(columns(&a).len(), 24);
        assert_eq!(columns(&b).len(), 24);
        assert_ne!(a, b);
        assert!(a.get(0, 48) && b.get(0, 48));
        assert_eq!(a, gaussian_mask((32, 96), 4.0, 1, false).unwrap());
        assert_eq!(a.acceleration(), 4.0);
        let d = gaussian_mask((32, 32), 4.0, 3, true).unwrap();
        assert_eq!(d.selected(), 256);
        assert!(d.get(16, 16));
        assert!(gaussian_mask((8, 8), 0.5, 1, false).is_err());
        assert!(gaussian_mask((8, 100), 100.0, 1, false).is_err());
    }

    #[test]
    fn gaussian_prefers_center() {
        let mut hits = vec![0usize; 64];
        for seed in 0..200 {
            let m = gaussian_mask((1, 64), 4.0, seed, false).unwrap();
            columns(&m).iter().for_each(|&c| hits[c] += 1);
        }
        assert!(hits[36] > hits[60]);
        assert!(hits[28] > hits[4]);
    }

    #[test]
    fn radial_axis_aligned_cases() {
        let one = radial_mask((9, 12), 1).unwrap();
        assert!((0..9).all(|r| (0..12).all(|c| one.get(r, c) == (r == 4))));
        let two = radial_mask((9, 12), 2).unwrap();
        assert!((0..9).all(|r| (0..12).all(|c| two.get(r, c) == (r == 4 || c == 6))));
    }

    #[test]
    fn radial_45_spoke_acceleration() {
        let m = radial_mask((640, 368), 45).unwrap();
        let acc = m.acceleration();
        assert!((9.0..=13.0).contains(&acc), "acceleration {acc}");
        assert_eq!(acc, (640 * 368) as f64 / m.selected() as f64);
    }

    #[test]
    fn phantom_contract() {
        let spec = PhantomSpec { ellipses: 0, ..PhantomSpec::default() };
        assert_eq!(phantom_image::<f64>(&spec).max_abs(), 0.0);
        for seed in 0..5 {
            let spec = PhantomSpec { seed, height: 40, width: 30, ellipses: 12, ..PhantomSpec::default() };
            let x = phantom_image::<f64>(&spec);
            assert!(x.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(x.max_abs() > 0.0);
            assert_eq!(x, phantom_image(&spec));
        }
    }

    #[test]
    fn coil_contract() {
        let s = synth_coils::<f64>((24, 20), 4, 0.5, 3).unwrap();
        assert!(rss(&s).as_slice().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let one = synth_coils::<f64>((10, 10), 1, 0.5, 3).unwrap();
        assert!(one.coil(0).as_slice().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert!(synth_coils::<f64>((4, 4), 0, 0.5, 0).is_err());
    }

    #[test]
    fn coil_smoothness_scales_with_width() {
        // recorded on a 64x64 grid: B * smoothness is 3.43, 2.35, 2.71 for 0.2, 0.5, 0.8
        let b = |s: f64| coil_smoothness(&synth_coils::<f64>((64, 64), 4, s, 7).unwrap());
        let (wide, narrow) = (b(0.8), b(0.2));
        assert!(narrow > wide);
        for s in [0.2, 0.5, 0.8] {
            assert!(b(s) < 4.0 / s, "B = {} at smoothness {s}", b(s));
        }
    }

    #[test]
    fn simulate_round_trip_and_noise() {
        let spec = PhantomSpec { height: 32, width: 24, coils: 3, ..PhantomSpec::default() };
        let ds = simulate::<f64>(&spec, &MaskSpec::CARTESIAN_4X).unwrap();
        let zf = zero_filled_rss(ForwardModel::new(SamplingMask::full(32, 24)).fft(), &ds.full);
        assert!(zf.axpy(-1.0, &ds.image).max_abs() < 1e-12);
        assert_eq!(ds.measured, KSpaceData::masked(ds.full.channels().to_vec(), ds.mask.clone()).unwrap());

        let noisy = PhantomSpec { noise_std: 0.05, ..spec.clone() };
        let nd = simulate::<f64>(&noisy, &MaskSpec::CARTESIAN_4X).unwrap();
        let mut n2 = 0.0;
        let mut k = 0usize;
        for (a, b) in nd.measured.channels().iter().zip(ds.measured.channels()) {
            for ((x, y), &m) in a.as_slice().iter().zip(b.as_slice()).zip(ds.mask.as_slice()) {
                if m {
                    n2 += (x - y).norm_sqr();
                    k += 1;
                } else {
                    assert_eq!(*x, Complex::new(0.0, 0.0));
                }
            }
        }
        let std = (n2 / k as f64).sqrt();
        assert!((std - 0.05).abs() < 0.005, "noise std {std}");
        assert!(simulate::<f64>(&PhantomSpec { coils: 0, ..spec }, &MaskSpec::CARTESIAN_4X).is_err());
    }

    #[test]
    fn mask_spec_json() {
        let s: MaskSpec = serde_json::from_str(r#"{"kind": "radial", "spokes": 45}"#).unwrap();
        assert_eq!(s, MaskSpec::RADIAL_45);
        let g: MaskSpec = serde_json::from_str(r#"{"kind": "gaussian", "acceleration": 4, "seed": 0}"#).unwrap();
        assert_eq!(g, MaskSpec::GAUSSIAN_4X);
        assert_eq!(MaskSpec::CARTESIAN_4X.label(), "cartesian-4x");
    }

    #[test]
    fn mixture_prior_contract() {
        let prior = MixturePrior { components: 3, seed: 7, ..MixturePrior::default() };
        let comps = prior.components::<f64>((24, 20)).unwrap();
        assert_eq!(comps.len(), 3);
        assert_ne!(comps[0].mean(), comps[1].mean());
        assert_eq!(prior.components::<f64>((24, 20)).unwrap(), comps);
        let score = prior.score::<f64>((24, 20)).unwrap();
        assert_eq!(score.components(), &comps[..]);

        let (k, a) = prior.sample::<f64>((24, 20), &mut Rng::new(1)).unwrap();
        let (k2, b) = prior.sample::<f64>((24, 20), &mut Rng::new(1)).unwrap();
        assert_eq!((k, &a), (k2, &b));
        assert!(k < 3);
        assert!(a.as_slice().iter().all(|&v| v >= 0.0));
        // texture noise is small next to the component mean
        let rel = a.axpy(-1.0, comps[k].mean()).norm_sq() / comps[k].mean().norm_sq();
        assert!(rel < 0.1, "{rel}");

        assert!(MixturePrior { components: 0, ..prior.clone() }.validate().is_err());
        assert!(MixturePrior { variance_floor: 0.0, ..prior }.validate().is_err());
    }
}
