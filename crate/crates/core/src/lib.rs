//! Joint reconstruction of an MRI image and its coil sensitivity maps from
//! sub-sampled multi-coil k-space, driven by a variance-exploding
//! score-based diffusion sampler.
//!
//! The sampler ([`sampler::reconstruct`]) alternates reverse-diffusion
//! predictor and Langevin corrector steps on a centered crop, gradient steps
//! on the data term `|A(x, S) - y|^2 / 2` and proximal-gradient updates of
//! the coil maps under a quadratic smoothness penalty. The image prior enters
//! only through a [`diffusion::ScoreFunction`]: a learned network
//! ([`diffusion::ScoreNet`]) or one of the analytic Gaussian scores.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The engine
//! is exercised in `f64`; the aliases below name the common cases.
//!
//! ```
//! use jointrecon::acquisition::{simulate, MaskSpec, PhantomSpec};
//! use jointrecon::diffusion::ZeroScore;
//! use jointrecon::sampler::{reconstruct, ReconConfig};
//!
//! let spec = PhantomSpec { height: 16, width: 16, coils: 2, ..PhantomSpec::default() };
//! let data = simulate::<f64>(&spec, &MaskSpec::CARTESIAN_4X).unwrap();
//! let config = ReconConfig { steps: 5, crop: Some((8, 8)), ..ReconConfig::default() };
//! let out = reconstruct(&data.measured, &config, &ZeroScore).unwrap();
//! assert_eq!(out.image.shape(), (16, 16));
//! ```

pub mod acquisition;
pub mod coil_estimation;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod fft;
pub mod finite_diff;
pub mod forward_model;
pub mod image;
pub mod presets;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod spectral;
pub mod tensor_io;

pub use error::{Error, Result};
pub use image::{CropWindow, SamplingMask};
pub use rng::Rng;
pub use scalar::Scalar;

pub type Image = image::RealImage<f64>;
pub type ComplexImage = image::ComplexImage<f64>;
pub type Coils = image::CoilSet<f64>;
pub type KSpace = image::KSpaceData<f64>;

pub type Image32 = image::RealImage<f32>;
pub type ComplexImage32 = image::ComplexImage<f32>;
pub type Coils32 = image::CoilSet<f32>;
pub type KSpace32 = image::KSpaceData<f32>;
