//! Joint reconstruction by reverse diffusion: predictor and Langevin
//! corrector on the center crop, padding with a forward-diffused
//! zero-filled image, gradient steps on the data fidelity, and proximal
//! coil updates.
//!
//! One running state `(x, coils)` is kept; each stage is applied to the
//! most recent iterate.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::coil_estimation::{zf_coil_init, CoilNormalization, SmoothingPlan};
use crate::diffusion::{ScoreFunction, SigmaSchedule, StepSchedule};
use crate::error::{Error, Result};
use crate::forward_model::{zero_filled_rss, ForwardModel};
use crate::image::{CoilSet, CropWindow, KSpaceData, RealImage};
use crate::presets::{self, Contrast, PatternKind};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::spectral::Boundary;

/// Noise scaling of the padding image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingNoise {
    /// `sigma * z`: the marginal of the forward process.
    #[default]
    Sigma,
    /// `sigma^2 * z`, as literally printed in some write-ups.
    SigmaSquared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    /// Reverse steps `N`.
    pub steps: usize,
    /// Corrector steps per iteration `M`.
    pub corrector_steps: usize,
    /// Corrector signal-to-noise ratio `r`.
    pub snr: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Data-consistency step sizes, each in `[0, 1]`.
    pub lambda: StepSchedule,
    /// Coil step sizes / smoothing strengths.
    pub mu: StepSchedule,
    /// Crop size `(height, width)` seen by the score model; the full grid
    /// when absent.
    pub crop: Option<(usize, usize)>,
    pub seed: u64,
    pub padding_noise: PaddingNoise,
    /// Apply the data-consistency step after the predictor as well as after
    /// the corrector.
    pub first_data_consistency: bool,
    pub coil_update: bool,
    pub coil_normalization: CoilNormalization,
    pub boundary: Boundary,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self::preset(PatternKind::Cartesian, Contrast::Pd)
    }
}

impl ReconConfig {
    pub fn preset(kind: PatternKind, contrast: Contrast) -> Self {
        let (lambda, mu) = presets::schedules(kind, contrast);
        Self {
            steps: presets::STEPS,
            corrector_steps: presets::CORRECTOR_STEPS,
            snr: presets::SNR,
            sigma_min: SigmaSchedule::DEFAULT_SIGMA_MIN,
            sigma_max: SigmaSchedule::DEFAULT_SIGMA_MAX,
            lambda,
            mu,
            crop: None,
            seed: 0,
            padding_noise: PaddingNoise::Sigma,
            first_data_consistency: true,
            coil_update: true,
            coil_normalization: CoilNormalization::SquaredNorm,
            boundary: Boundary::Neumann,
        }
    }

    pub fn sigma_schedule(&self) -> Result<SigmaSchedule> {
        SigmaSchedule::new(self.sigma_min, self.sigma_max, self.steps)
    }

    pub fn validate(&self) -> Result<()> {
        self.sigma_schedule()?;
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return Err(Error::domain(format!("corrector snr must be >= 0, got {}", self.snr)));
        }
        self.lambda.validate()?;
        if self.lambda.max_value() > 1.0 {
            return Err(Error::domain(format!("data-consistency step sizes must lie in [0, 1], max is {}", self.lambda.max_value())));
        }
        self.mu.validate()?;
        if self.coil_update && self.mu.at(1, self.steps)? == 0.0 {
            return Err(Error::domain("coil update needs positive mu"));
        }
        if let Some((h, w)) = self.crop {
            if h == 0 || w == 0 {
                return Err(Error::domain("crop must be non-empty"));
            }
        }
        Ok(())
    }

    fn window(&self, full: (usize, usize)) -> Result<CropWindow> {
        match self.crop {
            Some(c) => CropWindow::new(full, c),
            None => Ok(CropWindow::identity(full.0, full.1)),
        }
    }
}

/// Padding image `rss(F^-1 y) + sigma z` (or `sigma^2 z`).
pub fn fsde_image<T: Scalar>(zf_rss: &RealImage<T>, sigma: T, noise: PaddingNoise, rng: &mut Rng) -> RealImage<T> {
    let scale = match noise {
        PaddingNoise::Sigma => sigma,
        PaddingNoise::SigmaSquared => sigma * sigma,
    };
    let z: RealImage<T> = rng.normal_image(zf_rss.height(), zf_rss.width());
    zf_rss.axpy(scale, &z)
}

/// Reverse-diffusion predictor with an explicit noise draw `z`:
/// `x + (s_hi^2 - s_lo^2) score(x, s_hi) + sqrt(s_hi^2 - s_lo^2) z`.
pub fn predictor_update<T: Scalar, S: ScoreFunction<T> + ?Sized>(
    x: &RealImage<T>,
    sigma_hi: T,
    sigma_lo: T,
    score: &S,
    z: &RealImage<T>,
) -> Result<RealImage<T>> {
    if !(sigma_hi > sigma_lo && sigma_lo >= T::zero()) {
        return Err(Error::domain(format!("predictor needs sigma_hi > sigma_lo >= 0, got {sigma_hi} and {sigma_lo}")));
    }
    let d = sigma_hi * sigma_hi - sigma_lo * sigma_lo;
    let s = score.score(x, sigma_hi)?;
    Ok(x.axpy(d, &s).axpy(d.sqrt(), z))
}

pub fn predictor_step<T: Scalar, S: ScoreFunction<T> + ?Sized>(
    x: &RealImage<T>,
    sigma_hi: T,
    sigma_lo: T,
    score: &S,
    rng: &mut Rng,
) -> Result<RealImage<T>> {
    let z = rng.normal_image(x.height(), x.width());
    predictor_update(x, sigma_hi, sigma_lo, score, &z)
}

/// Langevin corrector with step `eps = 2 r^2 |z|^2 / |s|^2`, using the same
/// `z` for the step size and the noise. A zero score gives `eps = 0`.
pub fn corrector_update<T: Scalar, S: ScoreFunction<T> + ?Sized>(
    x: &RealImage<T>,
    sigma: T,
    score: &S,
    snr: T,
    z: &RealImage<T>,
) -> Result<RealImage<T>> {
    let s = score.score(x, sigma)?;
    let s_norm = s.norm_sq();
    if s_norm == T::zero() {
        warn!("zero score at sigma {sigma}; corrector step skipped");
        return Ok(x.clone());
    }
    let eps = T::lit(2.0) * snr * snr * z.norm_sq() / s_norm;
    Ok(x.axpy(eps, &s).axpy((T::lit(2.0) * eps).sqrt(), z))
}

pub fn corrector_step<T: Scalar, S: ScoreFunction<T> + ?Sized>(
    x: &RealImage<T>,
    sigma: T,
    score: &S,
    snr: T,
    rng: &mut Rng,
) -> Result<RealImage<T>> {
    let z = rng.normal_image(x.height(), x.width());
    corrector_update(x, sigma, score, snr, &z)
}

/// `x - lambda grad_x D(x, coils)`.
pub fn data_consistency<T: Scalar>(
    model: &ForwardModel<T>,
    x: &RealImage<T>,
    coils: &CoilSet<T>,
    y: &KSpaceData<T>,
    lambda: T,
) -> Result<RealImage<T>> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::domain(format!("data-consistency step {lambda} outside [0, 1]")));
    }
    if lambda == T::zero() {
        return Ok(x.clone());
    }
    Ok(x.axpy(-lambda, &model.grad_image(x, coils, y)?))
}

/// Running iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconState<T> {
    pub x: RealImage<T>,
    pub coils: CoilSet<T>,
    /// Index `i` of the iterate being produced (`N - 1` down to `0`); `N`
    /// for the initialization.
    pub step: usize,
}

/// Point in an iteration at which the observer is called.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Init,
    Predictor,
    FirstDataConsistency,
    Corrector,
    SecondDataConsistency,
    CoilUpdate,
}

/// Instrumentation hook. `padding` is the padding image of the current
/// iteration.
pub trait Observer<T> {
    fn observe(&mut self, stage: Stage, state: &ReconState<T>, padding: &RealImage<T>);
}

impl<T, F: FnMut(Stage, &ReconState<T>, &RealImage<T>)> Observer<T> for F {
    fn observe(&mut self, stage: Stage, state: &ReconState<T>, padding: &RealImage<T>) {
        self(stage, state, padding)
    }
}

struct NoObserver;

impl<T> Observer<T> for NoObserver {
    fn observe(&mut self, _: Stage, _: &ReconState<T>, _: &RealImage<T>) {}
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction<T> {
    pub image: RealImage<T>,
    pub coils: CoilSet<T>,
}

pub fn reconstruct<T: Scalar, S: ScoreFunction<T> + ?Sized>(
    y: &KSpaceData<T>,
    config: &ReconConfig,
    score: &S,
) -> Result<Reconstruction<T>> {
    reconstruct_observed(y, config, score, &mut NoObserver)
}

pub fn reconstruct_observed<T: Scalar, S: ScoreFunction<T> + ?Sized>(
    y: &KSpaceData<T>,
    config: &ReconConfig,
    score: &S,
    observer: &mut dyn Observer<T>,
) -> Result<Reconstruction<T>> {
    config.validate()?;
    let n = config.steps;
    let sched = config.sigma_schedule()?;
    let sigmas: Vec<T> = (0..=n).map(|i| sched.at(i).map(T::lit)).collect::<Result<_>>()?;
    let window = config.window(y.shape())?;
    if let Some(s) = score.shape() {
        if s != window.crop_shape() {
            return Err(Error::shape(format!("score model expects {s:?}, crop is {:?}", window.crop_shape())));
        }
    }
    let model = ForwardModel::new(y.mask().clone());
    let plan = SmoothingPlan::new(y.shape().0, y.shape().1, config.boundary);
    let zf = zero_filled_rss(model.fft(), y);
    let snr = T::lit(config.snr);
    let mut rng = Rng::new(config.seed);

    let coils = zf_coil_init(&model, y, config.coil_normalization)?;
    let x = fsde_image(&zf, sigmas[n], config.padding_noise, &mut rng);
    let mut state = ReconState { x, coils, step: n };
    observer.observe(Stage::Init, &state, &zf);

    for i in (0..n).rev() {
        state.step = i;
        let (hi, lo) = (sigmas[i + 1], sigmas[i]);
        let lambda = T::lit(config.lambda.at(i + 1, n)?);
        let padding = fsde_image(&zf, hi, config.padding_noise, &mut rng);

        let crop = predictor_step(&window.crop(&state.x)?, hi, lo, score, &mut rng)?;
        state.x = window.pad(&crop, &padding)?;
        observer.observe(Stage::Predictor, &state, &padding);

        if config.first_data_consistency {
            state.x = data_consistency(&model, &state.x, &state.coils, y, lambda)?;
            observer.observe(Stage::FirstDataConsistency, &state, &padding);
        }

        let mut crop = window.crop(&state.x)?;
        for _ in 0..config.corrector_steps {
            crop = corrector_step(&crop, hi, score, snr, &mut rng)?;
        }
        state.x = window.pad(&crop, &padding)?;
        observer.observe(Stage::Corrector, &state, &padding);

        state.x = data_consistency(&model, &state.x, &state.coils, y, lambda)?;
        observer.observe(Stage::SecondDataConsistency, &state, &padding);

        if config.coil_update {
            let mu = T::lit(config.mu.at(i + 1, n)?);
            state.coils = plan.coil_update(&model, &state.x, &state.coils, y, mu)?;
            observer.observe(Stage::CoilUpdate, &state, &padding);
        }

        if !state.x.is_finite() {
            return Err(Error::Numerical { step: i, what: "non-finite image iterate".into() });
        }
        if !state.coils.is_finite() {
            return Err(Error::Numerical { step: i, what: "non-finite coil iterate".into() });
        }
        if i % 100 == 0 {
            debug!("step {i}: sigma {hi}, lambda {lambda}");
        }
    }
    Ok(Reconstruction { image: state.x, coils: state.coils })
}
