//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls the code path it is used to check.

#![allow(dead_code)]

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use jointrecon::acquisition::{simulate_mixture, Dataset, MaskSpec, MixturePrior, PhantomSpec};
use jointrecon::coil_estimation::{zf_coil_init, CoilNormalization, SmoothingPlan};
use jointrecon::presets::Contrast;
use jointrecon::diffusion::{GaussianPriorScore, StepSchedule};
use jointrecon::eval::{nullspace_residual, psnr, zf_reconstruct};
use jointrecon::forward_model::ForwardModel;
use jointrecon::image::{CoilSet, ComplexImage, CropWindow, KSpaceData, RealImage, SamplingMask};
use jointrecon::sampler::{reconstruct, ReconConfig};
use jointrecon::spectral::Boundary;
use jointrecon::Rng;

pub struct Instance {
    pub model: ForwardModel<f64>,
    pub x: RealImage<f64>,
    pub coils: CoilSet<f64>,
    pub y: KSpaceData<f64>,
}

/// Random mask (each entry kept with probability `keep`), image, coils and
/// data. Coil magnitudes are bounded away from zero so the RSS floor never
/// engages.
pub fn random_instance(rng: &mut Rng, shape: (usize, usize), coils: usize, keep: f64) -> Instance {
    let (h, w) = shape;
    let mask = SamplingMask::from_fn(h, w, |_, _| rng.uniform() < keep).unwrap();
    let x = RealImage::from_fn(h, w, |_, _| rng.uniform_in(0.2, 1.5)).unwrap();
    let maps = (0..coils)
        .map(|_| {
            ComplexImage::from_fn(h, w, |_, _| {
                Complex::from_polar(rng.uniform_in(0.5, 1.5), rng.uniform_in(0.0, std::f64::consts::TAU))
            })
            .unwrap()
        })
        .collect();
    let coils = CoilSet::new(maps).unwrap();
    let channels = (0..coils.len()).map(|_| rng.normal_complex_image(h, w)).collect();
    let y = KSpaceData::masked(channels, mask.clone()).unwrap();
    Instance { model: ForwardModel::new(mask), x, coils, y }
}

/// `|<A x, r> - <x, A* r>| / (|x| |r|)` with the real inner product.
pub fn adjoint_gap(inst: &Instance, r: &[ComplexImage<f64>]) -> f64 {
    let ax = inst.model.forward(&inst.x, &inst.coils).unwrap();
    let lhs: f64 = ax
        .channels()
        .iter()
        .zip(r)
        .map(|(a, b)| a.as_slice().iter().zip(b.as_slice()).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<f64>())
        .sum();
    let back = inst.model.adjoint_lin(r, &inst.coils).unwrap();
    let rhs: f64 = inst.x.as_slice().iter().zip(back.as_slice()).map(|(a, b)| a * b).sum();
    let rn: f64 = r.iter().map(|c| c.as_slice().iter().map(|v| v.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt();
    let xn = inst.x.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    (lhs - rhs).abs() / (xn * rn)
}

/// `D(+) - D(-)` for the data term `D = |A - y|^2 / 2`, summed as
/// `Re<r+ - r-, r+ + r->/2` so that the large common part of the two
/// residuals cancels elementwise instead of in the totals.
fn fidelity_difference(plus: &KSpaceData<f64>, minus: &KSpaceData<f64>, y: &KSpaceData<f64>) -> f64 {
    let mut acc = 0.0;
    for ((p, m), d) in plus.channels().iter().zip(minus.channels()).zip(y.channels()) {
        for ((a, b), c) in p.as_slice().iter().zip(m.as_slice()).zip(d.as_slice()) {
            let (rp, rm) = (a - c, b - c);
            acc += ((rp - rm).conj() * (rp + rm)).re;
        }
    }
    acc / 2.0
}

/// Per-coordinate relative error of `(finite difference, analytic)` pairs.
pub fn coordinate_errors(pairs: &[(f64, f64)]) -> Vec<f64> {
    pairs.iter().map(|&(fd, an)| (fd - an).abs() / an.abs().max(fd.abs()).max(1e-12)).collect()
}

/// `|fd - an| / |an|` over the sampled coordinates as one vector. Unlike the
/// per-coordinate ratio this is not dominated by components that are tiny
/// next to the rounding floor `eps |A| |r| / step` of the difference.
pub fn vector_error(pairs: &[(f64, f64)]) -> f64 {
    let num: f64 = pairs.iter().map(|(fd, an)| (fd - an).powi(2)).sum();
    let den: f64 = pairs.iter().map(|(_, an)| an * an).sum();
    (num / den).sqrt()
}

/// `(central difference, grad_image)` of the data term at the given pixel
/// indices.
pub fn image_fd_pairs(inst: &Instance, pixels: &[usize], step: f64) -> Vec<(f64, f64)> {
    let g = inst.model.grad_image(&inst.x, &inst.coils, &inst.y).unwrap();
    let (h, w) = inst.x.shape();
    pixels
        .iter()
        .map(|&p| {
            let bump = |d: f64| {
                let mut v = inst.x.clone().into_vec();
                v[p] += d;
                RealImage::new(h, w, v).unwrap()
            };
            let a = |x: &RealImage<f64>| inst.model.forward(x, &inst.coils).unwrap();
            let fd = fidelity_difference(&a(&bump(step)), &a(&bump(-step)), &inst.y) / (2.0 * step);
            (fd, g.as_slice()[p])
        })
        .collect()
}

/// `(central difference, grad_coils)` along `(coil, pixel, imaginary?)`
/// coordinates.
pub fn coil_fd_pairs(inst: &Instance, coords: &[(usize, usize, bool)], step: f64) -> Vec<(f64, f64)> {
    let g = inst.model.grad_coils(&inst.x, &inst.coils, &inst.y).unwrap();
    let (h, w) = inst.x.shape();
    coords
        .iter()
        .map(|&(j, p, imag)| {
            let bump = |d: f64| {
                let mut maps = inst.coils.clone().into_coils();
                let mut v = maps[j].clone().into_vec();
                if imag {
                    v[p].im += d;
                } else {
                    v[p].re += d;
                }
                maps[j] = ComplexImage::new(h, w, v).unwrap();
                CoilSet::new(maps).unwrap()
            };
            let a = |s: &CoilSet<f64>| inst.model.forward(&inst.x, s).unwrap();
            let fd = fidelity_difference(&a(&bump(step)), &a(&bump(-step)), &inst.y) / (2.0 * step);
            let gv = g.coil(j).as_slice()[p];
            (fd, if imag { gv.im } else { gv.re })
        })
        .collect()
}

/// 1-D second-difference matrix from its stencil.
fn second_difference(n: usize, boundary: Boundary) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0;
        if i > 0 {
            m[(i, i - 1)] = -1.0;
        }
        if i + 1 < n {
            m[(i, i + 1)] = -1.0;
        }
    }
    if boundary == Boundary::Neumann {
        // mirrored ghost cells cancel one neighbour at each end
        m[(0, 0)] = 1.0;
        m[(n - 1, n - 1)] = 1.0;
        if n == 1 {
            m[(0, 0)] = 0.0;
        }
    }
    m
}

/// Direct solve of `(I + L / mu) v = u` with the row-major 2-D Laplacian.
pub fn prox_dense(u: &RealImage<f64>, mu: f64, boundary: Boundary) -> RealImage<f64> {
    let (h, w) = u.shape();
    let lh = second_difference(h, boundary);
    let lw = second_difference(w, boundary);
    let l = lh.kronecker(&DMatrix::identity(w, w)) + DMatrix::identity(h, h).kronecker(&lw);
    let a = DMatrix::identity(h * w, h * w) + l / mu;
    let v = a.lu().solve(&DVector::from_column_slice(u.as_slice())).unwrap();
    RealImage::new(h, w, v.as_slice().to_vec()).unwrap()
}

pub fn prox_gap(u: &RealImage<f64>, mu: f64, boundary: Boundary) -> f64 {
    let (h, w) = u.shape();
    let fast = SmoothingPlan::new(h, w, boundary).smooth_q(u, mu).unwrap();
    fast.axpy(-1.0, &prox_dense(u, mu, boundary)).max_abs()
}

/// Per-pixel sample moments of the unconditional sampler (no data
/// consistency, no coil update) under an independent Gaussian prior.
pub struct Moments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub runs: usize,
}

pub fn analytic_prior_moments(prior: &GaussianPriorScore<f64>, pad: usize, steps: usize, runs: usize, seed: u64) -> Moments {
    let (ch, cw) = prior.mean().shape();
    let (h, w) = (ch + 2 * pad, cw + 2 * pad);
    let coils = CoilSet::new(vec![ComplexImage::from_fn(h, w, |_, _| Complex::new(1.0, 0.0)).unwrap()]).unwrap();
    let window = CropWindow::new((h, w), (ch, cw)).unwrap();
    let x = window.pad(prior.mean(), &RealImage::filled(h, w, 0.5)).unwrap();
    let y = ForwardModel::new(SamplingMask::full(h, w)).forward(&x, &coils).unwrap();
    let config = ReconConfig {
        steps,
        crop: Some((ch, cw)),
        lambda: StepSchedule::Constant { value: 0.0 },
        coil_update: false,
        ..ReconConfig::default()
    };
    let n = ch * cw;
    let (mut s1, mut s2) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..runs {
        let cfg = ReconConfig { seed: seed.wrapping_add(k as u64), ..config.clone() };
        let out = reconstruct(&y, &cfg, prior).unwrap();
        let crop = window.crop(&out.image).unwrap();
        for (p, &v) in crop.as_slice().iter().enumerate() {
            s1[p] += v;
            s2[p] += v * v;
        }
    }
    let r = runs as f64;
    let mean: Vec<f64> = s1.iter().map(|s| s / r).collect();
    let var = s2.iter().zip(&mean).map(|(s, m)| (s - r * m * m) / (r - 1.0)).collect();
    Moments { mean, var, runs }
}

pub const SUITE_SHAPE: (usize, usize) = (128, 96);
pub const SUITE_CROP: (usize, usize) = (64, 64);
pub const SUITE_COILS: usize = 4;
pub const SUITE_MASKS: [MaskSpec; 3] = [MaskSpec::CARTESIAN_4X, MaskSpec::GAUSSIAN_4X, MaskSpec::RADIAL_45];

/// Table-1 schedules for the mask family, with the pointwise-normalized
/// initial maps: the squared-norm rescale drives the per-pixel RSS of a
/// 128x96 stack to ~1e-4, within reach of the RSS floor.
pub fn suite_config(mask: &MaskSpec) -> ReconConfig {
    ReconConfig {
        coil_normalization: CoilNormalization::None,
        ..ReconConfig::preset(mask.pattern(), Contrast::Pd)
    }
}

pub fn suite_case(mask: &MaskSpec, case: u64) -> (Dataset<f64>, MixturePrior) {
    let spec = PhantomSpec {
        height: SUITE_SHAPE.0,
        width: SUITE_SHAPE.1,
        coils: SUITE_COILS,
        seed: case,
        ..PhantomSpec::default()
    };
    let prior = MixturePrior::default();
    (simulate_mixture(&spec, mask, &prior, SUITE_CROP).unwrap(), prior)
}

pub struct SuiteRow {
    pub mask: String,
    pub case: u64,
    pub psnr_zf: f64,
    pub psnr: f64,
    pub null_init: f64,
    pub null_final: f64,
    pub seconds: f64,
}

impl SuiteRow {
    pub fn gain(&self) -> f64 {
        self.psnr - self.psnr_zf
    }
}

/// Runs the diffusion reconstruction with the mixture score on one suite
/// case and scores it against ZF on the crop.
pub fn run_suite_case(mask: &MaskSpec, case: u64, config: &ReconConfig) -> SuiteRow {
    let (ds, prior) = suite_case(mask, case);
    let window = CropWindow::new(SUITE_SHAPE, SUITE_CROP).unwrap();
    let gt = window.crop(&ds.image).unwrap();
    let zf = zf_reconstruct(&ds.measured);
    let psnr_zf = psnr(&window.crop(&zf).unwrap(), &gt).unwrap();
    let score = prior.score::<f64>(SUITE_CROP).unwrap();
    let cfg = ReconConfig { crop: Some(SUITE_CROP), seed: case, ..config.clone() };
    let t = Instant::now();
    let out = reconstruct(&ds.measured, &cfg, &score).unwrap();
    let seconds = t.elapsed().as_secs_f64();
    let init = zf_coil_init(&ForwardModel::new(ds.mask.clone()), &ds.measured, cfg.coil_normalization).unwrap();
    SuiteRow {
        mask: mask.label(),
        case,
        psnr_zf,
        psnr: psnr(&window.crop(&out.image).unwrap(), &gt).unwrap(),
        null_init: nullspace_residual(&ds.full, &init).unwrap().1,
        null_final: nullspace_residual(&ds.full, &out.coils).unwrap().1,
        seconds,
    }
}
