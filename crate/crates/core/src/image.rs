//! Image containers: real magnitude images, complex coil images, coil sets,
//! sampling masks and masked k-space.
//!
//! All containers are row-major and immutable from the outside once built;
//! the public constructors reject non-finite entries.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_len(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::shape(format!("empty grid {height}x{width}")));
    }
    if height * width != len {
        return Err(Error::shape(format!(
            "{} values do not fill a {height}x{width} grid",
            len
        )));
    }
    Ok(())
}

/// Real-valued 2-D image.
#[derive(Clone, Debug, PartialEq)]
pub struct RealImage<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> RealImage<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        check_len(height, width, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("real image entry {i}")));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, T::zero())
    }

    /// # Panics
    /// If `value` is not finite or the grid is empty.
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self::new(height, width, vec![value; height * width]).expect("finite fill value")
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(height * width, data.len());
        Self { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Self::from_raw(
            self.height,
            self.width,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "dot shape mismatch");
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn to_complex(&self) -> ComplexImage<T> {
        ComplexImage::from_raw(
            self.height,
            self.width,
            self.data.iter().map(|&v| Complex::new(v, T::zero())).collect(),
        )
    }

    pub fn cast<U: Scalar>(&self) -> RealImage<U> {
        RealImage::from_raw(
            self.height,
            self.width,
            self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        )
    }
}

/// Complex-valued 2-D image (a coil image, or one k-space channel).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage<T> {
    height: usize,
    width: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexImage<T> {
    pub fn new(height: usize, width: usize, data: Vec<Complex<T>>) -> Result<Self> {
        check_len(height, width, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("complex image entry {i}")));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::from_raw(height, width, vec![Complex::new(T::zero(), T::zero()); height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    /// Combines separate real and imaginary parts.
    pub fn from_parts(re: &RealImage<T>, im: &RealImage<T>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::shape("real/imaginary parts differ in shape"));
        }
        Ok(Self::from_raw(
            re.height(),
            re.width(),
            re.as_slice()
                .iter()
                .zip(im.as_slice())
                .map(|(&a, &b)| Complex::new(a, b))
                .collect(),
        ))
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(height * width, data.len());
        Self { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn re(&self) -> RealImage<T> {
        RealImage::from_raw(self.height, self.width, self.data.iter().map(|v| v.re).collect())
    }

    pub fn im(&self) -> RealImage<T> {
        RealImage::from_raw(self.height, self.width, self.data.iter().map(|v| v.im).collect())
    }

    pub fn abs(&self) -> RealImage<T> {
        RealImage::from_raw(self.height, self.width, self.data.iter().map(|v| v.norm()).collect())
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self::from_raw(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Real part of the Hermitian inner product, i.e. the Euclidean inner
    /// product of the images viewed as real vectors of twice the length.
    pub fn real_dot(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "real_dot shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }
}

/// Ordered stack of coil sensitivity maps.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilSet<T> {
    coils: Vec<ComplexImage<T>>,
}

impl<T: Scalar> CoilSet<T> {
    pub fn new(coils: Vec<ComplexImage<T>>) -> Result<Self> {
        let first = coils.first().ok_or_else(|| Error::shape("coil set needs at least one coil"))?;
        let shape = first.shape();
        if coils.iter().any(|c| c.shape() != shape) {
            return Err(Error::shape("coil images differ in shape"));
        }
        Ok(Self { coils })
    }

    pub fn zeros(count: usize, height: usize, width: usize) -> Self {
        assert!(count >= 1, "coil set needs at least one coil");
        Self { coils: vec![ComplexImage::zeros(height, width); count] }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coils.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coils.is_empty()
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.coils[0].shape()
    }

    pub fn coils(&self) -> &[ComplexImage<T>] {
        &self.coils
    }

    pub fn coil(&self, j: usize) -> &ComplexImage<T> {
        &self.coils[j]
    }

    pub fn into_coils(self) -> Vec<ComplexImage<T>> {
        self.coils
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ComplexImage<T>> {
        self.coils.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.coils.iter().all(ComplexImage::is_finite)
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { coils: self.coils.iter().map(|c| c.scaled(s)).collect() }
    }

    /// `self + s * other`, coil by coil.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "coil count mismatch");
        let coils = self
            .coils
            .iter()
            .zip(&other.coils)
            .map(|(a, b)| {
                assert_eq!(a.shape(), b.shape(), "coil shape mismatch");
                ComplexImage::from_raw(
                    a.height(),
                    a.width(),
                    a.as_slice().iter().zip(b.as_slice()).map(|(&u, &v)| u + v * s).collect(),
                )
            })
            .collect();
        Self { coils }
    }

    /// Squared 2-norm of the whole stack.
    pub fn norm_sq(&self) -> T {
        self.coils.iter().map(ComplexImage::norm_sq).sum()
    }

    pub fn real_dot(&self, other: &Self) -> T {
        self.coils.iter().zip(&other.coils).map(|(a, b)| a.real_dot(b)).sum()
    }
}

/// Binary selection of acquired k-space locations, stored in centered
/// layout (zero frequency at `(height / 2, width / 2)`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    select: Vec<bool>,
}

impl SamplingMask {
    pub fn new(height: usize, width: usize, select: Vec<bool>) -> Result<Self> {
        check_len(height, width, select.len())?;
        if !select.iter().any(|&s| s) {
            return Err(Error::domain("sampling mask selects nothing"));
        }
        Ok(Self { height, width, select })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self { height, width, select: vec![true; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut select = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                select.push(f(r, c));
            }
        }
        Self::new(height, width, select)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.select[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.select
    }

    pub fn selected(&self) -> usize {
        self.select.iter().filter(|&&s| s).count()
    }

    /// Total number of grid points divided by the number selected.
    pub fn acceleration(&self) -> f64 {
        self.select.len() as f64 / self.selected() as f64
    }

    pub fn transpose(&self) -> Self {
        let (h, w) = self.shape();
        let mut select = vec![false; h * w];
        for r in 0..h {
            for c in 0..w {
                select[c * h + r] = self.select[r * w + c];
            }
        }
        Self { height: w, width: h, select }
    }

    pub fn to_image<T: Scalar>(&self) -> RealImage<T> {
        RealImage::from_raw(
            self.height,
            self.width,
            self.select.iter().map(|&s| if s { T::one() } else { T::zero() }).collect(),
        )
    }

    /// Inverse of [`SamplingMask::to_image`]: nonzero entries are selected.
    pub fn from_image<T: Scalar>(img: &RealImage<T>) -> Result<Self> {
        Self::new(
            img.height(),
            img.width(),
            img.as_slice().iter().map(|v| !v.is_zero()).collect(),
        )
    }
}

/// Multi-coil k-space restricted to a sampling mask; entries off the mask
/// are exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData<T> {
    channels: Vec<ComplexImage<T>>,
    mask: SamplingMask,
}

impl<T: Scalar> KSpaceData<T> {
    /// Validates that every channel vanishes off the mask.
    pub fn new(channels: Vec<ComplexImage<T>>, mask: SamplingMask) -> Result<Self> {
        Self::check_shapes(&channels, &mask)?;
        for (j, ch) in channels.iter().enumerate() {
            if ch
                .as_slice()
                .iter()
                .zip(mask.as_slice())
                .any(|(v, &s)| !s && !(v.re.is_zero() && v.im.is_zero()))
            {
                return Err(Error::domain(format!("channel {j} has data off the sampling mask")));
            }
        }
        Ok(Self { channels, mask })
    }

    /// Zeroes every channel off the mask.
    pub fn masked(mut channels: Vec<ComplexImage<T>>, mask: SamplingMask) -> Result<Self> {
        Self::check_shapes(&channels, &mask)?;
        for ch in &mut channels {
            apply_mask(ch, &mask);
        }
        Ok(Self { channels, mask })
    }

    fn check_shapes(channels: &[ComplexImage<T>], mask: &SamplingMask) -> Result<()> {
        if channels.is_empty() {
            return Err(Error::shape("k-space needs at least one channel"));
        }
        if channels.iter().any(|c| c.shape() != mask.shape()) {
            return Err(Error::shape("k-space channel and mask shapes differ"));
        }
        if !channels.iter().all(ComplexImage::is_finite) {
            return Err(Error::NonFinite("k-space".into()));
        }
        Ok(())
    }

    pub(crate) fn from_raw(channels: Vec<ComplexImage<T>>, mask: SamplingMask) -> Self {
        Self { channels, mask }
    }

    pub fn channels(&self) -> &[ComplexImage<T>] {
        &self.channels
    }

    pub fn channel(&self, j: usize) -> &ComplexImage<T> {
        &self.channels[j]
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn coil_count(&self) -> usize {
        self.channels.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    pub fn norm_sq(&self) -> T {
        self.channels.iter().map(ComplexImage::norm_sq).sum()
    }

    /// Channels viewed as a coil set (same layout, no transform).
    pub fn to_stack(&self) -> CoilSet<T> {
        CoilSet { coils: self.channels.clone() }
    }
}

pub(crate) fn apply_mask<T: Scalar>(img: &mut ComplexImage<T>, mask: &SamplingMask) {
    let zero = Complex::new(T::zero(), T::zero());
    for (v, &s) in img.as_mut_slice().iter_mut().zip(mask.as_slice()) {
        if !s {
            *v = zero;
        }
    }
}

/// Full grid with a centered crop window.
///
/// The window origin is `((H - h) / 2, (W - w) / 2)` with integer division,
/// so odd size differences put the extra row/column after the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropWindow {
    pub full_height: usize,
    pub full_width: usize,
    pub crop_height: usize,
    pub crop_width: usize,
}

impl CropWindow {
    pub fn new(full: (usize, usize), crop: (usize, usize)) -> Result<Self> {
        let w = Self {
            full_height: full.0,
            full_width: full.1,
            crop_height: crop.0,
            crop_width: crop.1,
        };
        w.validate()?;
        Ok(w)
    }

    /// Window covering the whole grid.
    pub fn identity(height: usize, width: usize) -> Self {
        Self { full_height: height, full_width: width, crop_height: height, crop_width: width }
    }

    pub fn validate(&self) -> Result<()> {
        if self.crop_height == 0
            || self.crop_width == 0
            || self.crop_height > self.full_height
            || self.crop_width > self.full_width
        {
            return Err(Error::shape(format!(
                "crop {}x{} does not fit in {}x{}",
                self.crop_height, self.crop_width, self.full_height, self.full_width
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn origin(&self) -> (usize, usize) {
        ((self.full_height - self.crop_height) / 2, (self.full_width - self.crop_width) / 2)
    }

    pub fn full_shape(&self) -> (usize, usize) {
        (self.full_height, self.full_width)
    }

    pub fn crop_shape(&self) -> (usize, usize) {
        (self.crop_height, self.crop_width)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (r0, c0) = self.origin();
        row >= r0 && row < r0 + self.crop_height && col >= c0 && col < c0 + self.crop_width
    }

    /// Center window of a full-size image.
    pub fn crop<T: Scalar>(&self, x: &RealImage<T>) -> Result<RealImage<T>> {
        if x.shape() != self.full_shape() {
            return Err(Error::shape(format!(
                "crop input is {:?}, window expects {:?}",
                x.shape(),
                self.full_shape()
            )));
        }
        let (r0, c0) = self.origin();
        let mut data = Vec::with_capacity(self.crop_height * self.crop_width);
        for r in 0..self.crop_height {
            let start = (r0 + r) * self.full_width + c0;
            data.extend_from_slice(&x.as_slice()[start..start + self.crop_width]);
        }
        Ok(RealImage::from_raw(self.crop_height, self.crop_width, data))
    }

    /// Copy of `background` with `crop` written into the center window.
    pub fn pad<T: Scalar>(&self, crop: &RealImage<T>, background: &RealImage<T>) -> Result<RealImage<T>> {
        if crop.shape() != self.crop_shape() || background.shape() != self.full_shape() {
            return Err(Error::shape(format!(
                "pad got crop {:?} and background {:?} for window {:?}",
                crop.shape(),
                background.shape(),
                self
            )));
        }
        let (r0, c0) = self.origin();
        let mut out = background.clone();
        let dst = out.as_mut_slice();
        for r in 0..self.crop_height {
            let start = (r0 + r) * self.full_width + c0;
            dst[start..start + self.crop_width]
                .copy_from_slice(&crop.as_slice()[r * self.crop_width..(r + 1) * self.crop_width]);
        }
        Ok(out)
    }
}
