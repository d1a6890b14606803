mod common;

use common::*;
use jointrecon::acquisition::{simulate_mixture, MaskSpec, MixturePrior, PhantomSpec};
use jointrecon::coil_estimation::SmoothingPlan;
use jointrecon::diffusion::{GaussianPriorScore, SigmaSchedule, StepSchedule, ZeroScore};
use jointrecon::forward_model::{zero_filled_rss, ForwardModel};
use jointrecon::image::{CropWindow, RealImage};
use jointrecon::sampler::*;
use jointrecon::tensor_io::{encode, Tensor};
use jointrecon::Rng;

fn small_case(seed: u64) -> jointrecon::acquisition::Dataset<f64> {
    let spec = PhantomSpec { height: 24, width: 20, coils: 3, seed, noise_std: 0.01, ..PhantomSpec::default() };
    let prior = MixturePrior { components: 3, ..MixturePrior::default() };
    simulate_mixture(&spec, &MaskSpec::CARTESIAN_4X, &prior, (12, 12)).unwrap()
}

fn small_config(seed: u64) -> ReconConfig {
    ReconConfig { steps: 40, crop: Some((12, 12)), seed, ..ReconConfig::default() }
}

#[test]
fn padding_image_has_forward_process_statistics() {
    let zf = RealImage::from_fn(16, 16, |r, c| (r + c) as f64 / 30.0).unwrap();
    let mut rng = Rng::new(200);
    let sigma = 0.7;
    let draws = 2000;
    let n = zf.len();
    let (mut s1, mut s2) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..draws {
        let x = fsde_image(&zf, sigma, PaddingNoise::Sigma, &mut rng);
        for (p, (&v, &m)) in x.as_slice().iter().zip(zf.as_slice()).enumerate() {
            s1[p] += v - m;
            s2[p] += (v - m) * (v - m);
        }
    }
    let d = draws as f64;
    let se = sigma / d.sqrt();
    // pooled over pixels: mean offset and variance
    let pooled_mean = s1.iter().sum::<f64>() / (d * n as f64);
    let pooled_var = s2.iter().sum::<f64>() / (d * n as f64);
    assert!(pooled_mean.abs() < 4.0 * se / (n as f64).sqrt(), "{pooled_mean}");
    assert!((pooled_var / (sigma * sigma) - 1.0).abs() < 0.02, "{pooled_var}");
    assert!(s1.iter().all(|s| (s / d).abs() < 5.0 * se));
}

#[test]
fn corrector_leaves_the_perturbed_prior_nearly_invariant() {
    // Unadjusted Langevin on N(m, v + sigma^2) with relative step 2 r^2 has
    // variance bias of order r^2 / 2; r = 0.16 keeps it near 1%.
    let (h, w) = (32, 32);
    let (m, v, sigma, snr) = (0.4, 0.3, 0.5, 0.16);
    let prior = GaussianPriorScore::new(RealImage::filled(h, w, m), RealImage::filled(h, w, v)).unwrap();
    let target = v + sigma * sigma;
    let mut rng = Rng::new(201);
    let mut samples = Vec::new();
    for _ in 0..4 {
        let mut x = RealImage::filled(h, w, m + 1.0);
        for _ in 0..600 {
            x = corrector_step(&x, sigma, &prior, snr, &mut rng).unwrap();
        }
        samples.extend_from_slice(x.as_slice());
    }
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (k - 1.0);
    assert!((mean - m).abs() < 4.0 * (target / k).sqrt(), "mean {mean}");
    assert!((var / target - 1.0).abs() < 0.06, "var {var} vs {target}");
}

#[test]
fn data_consistency_descends_for_small_steps() {
    let ds = small_case(202);
    let model = ForwardModel::new(ds.mask.clone());
    let mut rng = Rng::new(202);
    let x: RealImage<f64> = rng.normal_image(24, 20);
    let d0 = model.data_fidelity(&x, &ds.coils, &ds.measured).unwrap();
    let x1 = data_consistency(&model, &x, &ds.coils, &ds.measured, 0.01).unwrap();
    assert!(model.data_fidelity(&x1, &ds.coils, &ds.measured).unwrap() < d0);
    assert_eq!(data_consistency(&model, &x, &ds.coils, &ds.measured, 0.0).unwrap(), x);
    assert!(data_consistency(&model, &x, &ds.coils, &ds.measured, 1.5).is_err());
}

#[test]
fn iterates_follow_the_documented_structure() {
    let ds = small_case(203);
    let config = small_config(3);
    let window = CropWindow::new((24, 20), (12, 12)).unwrap();
    let model = ForwardModel::new(ds.mask.clone());
    let plan = SmoothingPlan::new(24, 20, config.boundary);
    let zf = zero_filled_rss(model.fft(), &ds.measured);
    let sigmas = SigmaSchedule::new(config.sigma_min, config.sigma_max, config.steps).unwrap();
    let prior = MixturePrior { components: 3, ..MixturePrior::default() }.score::<f64>((12, 12)).unwrap();

    let mut prev: Option<ReconState<f64>> = None;
    let mut last_padding: Option<(usize, RealImage<f64>)> = None;
    let mut stages = Vec::new();
    let mut failures = Vec::new();
    let mut observer = |stage: Stage, s: &ReconState<f64>, padding: &RealImage<f64>| {
        stages.push(stage);
        let outside_is_padding = (0..24).all(|r| (0..20).all(|c| window.contains(r, c) || s.x.get(r, c) == padding.get(r, c)));
        let n = config.steps;
        match stage {
            Stage::Init => {
                if padding != &zf || s.step != n {
                    failures.push("init");
                }
            }
            Stage::Predictor | Stage::Corrector => {
                if !outside_is_padding {
                    failures.push("outside crop is not the padding image");
                }
                // one padding draw per iteration
                if let Some((i, p)) = &last_padding {
                    if *i == s.step && p != padding {
                        failures.push("padding redrawn within an iteration");
                    }
                }
                last_padding = Some((s.step, padding.clone()));
            }
            Stage::FirstDataConsistency | Stage::SecondDataConsistency => {
                let p = prev.as_ref().unwrap();
                let lambda = config.lambda.at(s.step + 1, n).unwrap();
                let expect = data_consistency(&model, &p.x, &p.coils, &ds.measured, lambda).unwrap();
                if expect != s.x || p.coils != s.coils {
                    failures.push("data consistency is not a plain gradient step");
                }
            }
            Stage::CoilUpdate => {
                let p = prev.as_ref().unwrap();
                let mu = config.mu.at(s.step + 1, n).unwrap();
                if plan.coil_update(&model, &p.x, &p.coils, &ds.measured, mu).unwrap() != s.coils || p.x != s.x {
                    failures.push("coil update mismatch");
                }
            }
        }
        if stage == Stage::Predictor {
            // padding noise level is sigma_{i+1}
            let sd = (padding.axpy(-1.0, &zf).norm_sq() / padding.len() as f64).sqrt();
            let want = sigmas.at(s.step + 1).unwrap();
            if (sd / want - 1.0).abs() > 0.3 {
                failures.push("padding noise level");
            }
        }
        prev = Some(s.clone());
    };
    reconstruct_observed(&ds.measured, &config, &prior, &mut observer).unwrap();
    assert!(failures.is_empty(), "{failures:?}");
    let per_iter = [
        Stage::Predictor,
        Stage::FirstDataConsistency,
        Stage::Corrector,
        Stage::SecondDataConsistency,
        Stage::CoilUpdate,
    ];
    assert_eq!(stages.len(), 1 + per_iter.len() * config.steps);
    assert!(stages[1..].chunks(5).all(|c| c == per_iter));
}

#[test]
fn optional_stages_can_be_switched_off() {
    let ds = small_case(204);
    let config = ReconConfig { first_data_consistency: false, coil_update: false, ..small_config(4) };
    let mut seen = Vec::new();
    let mut obs = |stage: Stage, _: &ReconState<f64>, _: &RealImage<f64>| seen.push(stage);
    let out = reconstruct_observed(&ds.measured, &config, &ZeroScore, &mut obs).unwrap();
    assert!(!seen.contains(&Stage::FirstDataConsistency) && !seen.contains(&Stage::CoilUpdate));
    let init = jointrecon::coil_estimation::zf_coil_init(&ForwardModel::new(ds.mask.clone()), &ds.measured, config.coil_normalization).unwrap();
    assert_eq!(out.coils, init);
}

#[test]
fn reconstruction_is_deterministic_per_seed() {
    let ds = small_case(205);
    let prior = MixturePrior { components: 3, ..MixturePrior::default() }.score::<f64>((12, 12)).unwrap();
    let bytes = |seed| {
        let out = reconstruct(&ds.measured, &small_config(seed), &prior).unwrap();
        assert!(out.image.is_finite() && out.coils.is_finite());
        (encode(&Tensor::Real(out.image)).unwrap(), encode(&Tensor::Coils(out.coils)).unwrap())
    };
    assert_eq!(bytes(7), bytes(7));
    assert_ne!(bytes(7).0, bytes(8).0);
}

#[test]
fn unconditional_sampler_matches_a_gaussian_prior_roughly() {
    // small version of the acceptance check
    let mut rng = Rng::new(206);
    let mean = RealImage::from_fn(4, 4, |_, _| rng.uniform_in(-1.0, 1.0)).unwrap();
    let var = RealImage::from_fn(4, 4, |_, _| rng.uniform_in(0.5, 1.5)).unwrap();
    let prior = GaussianPriorScore::new(mean.clone(), var.clone()).unwrap();
    let m = analytic_prior_moments(&prior, 2, 100, 600, 1);
    for p in 0..16 {
        let se = (var.as_slice()[p] / m.runs as f64).sqrt();
        assert!((m.mean[p] - mean.as_slice()[p]).abs() < 4.5 * se, "pixel {p}");
        assert!((m.var[p] / var.as_slice()[p] - 1.0).abs() < 0.3, "pixel {p}");
    }
}

#[test]
fn lambda_schedule_must_stay_in_unit_interval() {
    let bad = ReconConfig { lambda: StepSchedule::Constant { value: 1.2 }, ..ReconConfig::default() };
    assert!(bad.validate().is_err());
    let ds = small_case(207);
    assert!(reconstruct(&ds.measured, &bad, &ZeroScore).is_err());
}
