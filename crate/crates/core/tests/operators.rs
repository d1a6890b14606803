mod common;

use common::*;
use jointrecon::coil_estimation::{zf_coil_init, zf_coil_maps, CoilNormalization, SmoothingPlan};
use jointrecon::forward_model::{rss, ForwardModel};
use jointrecon::image::{CoilSet, RealImage, SamplingMask};
use jointrecon::spectral::{dct2, dst2, idst2, Boundary, LaplaceTransform};
use jointrecon::Rng;

#[test]
fn adjoint_identity_small_grids() {
    let mut rng = Rng::new(100);
    for (k, c) in [1, 2, 4].into_iter().cycle().take(9).enumerate() {
        let inst = random_instance(&mut rng, (12 + k, 9), c, 0.4);
        let r: Vec<_> = (0..c).map(|_| rng.normal_complex_image(12 + k, 9)).collect();
        assert!(adjoint_gap(&inst, &r) < 1e-12);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = Rng::new(101);
    let inst = random_instance(&mut rng, (10, 8), 3, 0.5);
    let pixels: Vec<usize> = (0..20).map(|_| rng.below(80)).collect();
    assert!(coordinate_errors(&image_fd_pairs(&inst, &pixels, 1e-6)).iter().all(|&e| e < 1e-6));
    let coords: Vec<_> = (0..20).map(|_| (rng.below(3), rng.below(80), rng.uniform() < 0.5)).collect();
    assert!(coordinate_errors(&coil_fd_pairs(&inst, &coords, 1e-6)).iter().all(|&e| e < 1e-5));
}

#[test]
fn coil_gradient_is_orthogonal_to_the_coils() {
    // A is invariant under S -> gS, so the derivative along S vanishes.
    let mut rng = Rng::new(102);
    let inst = random_instance(&mut rng, (8, 8), 2, 0.6);
    let g = inst.model.grad_coils(&inst.x, &inst.coils, &inst.y).unwrap();
    let scale = (g.norm_sq() * inst.coils.norm_sq()).sqrt();
    assert!(g.real_dot(&inst.coils).abs() < 1e-12 * scale);
}

#[test]
fn forward_is_scale_invariant_in_the_coils() {
    let mut rng = Rng::new(103);
    let inst = random_instance(&mut rng, (9, 7), 4, 0.5);
    let base = inst.model.forward(&inst.x, &inst.coils).unwrap();
    for g in [0.1, 2.0, 100.0] {
        let scaled = inst.model.forward(&inst.x, &inst.coils.scaled(g)).unwrap();
        for (a, b) in base.channels().iter().zip(scaled.channels()) {
            for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((u - v).norm() < 1e-12);
            }
        }
        let ga = inst.model.grad_image(&inst.x, &inst.coils, &inst.y).unwrap();
        let gb = inst.model.grad_image(&inst.x, &inst.coils.scaled(g), &inst.y).unwrap();
        assert!(ga.axpy(-1.0, &gb).max_abs() < 1e-12);
    }
}

#[test]
fn off_mask_entries_are_discarded() {
    let mut rng = Rng::new(104);
    let inst = random_instance(&mut rng, (8, 6), 2, 0.3);
    let mask = inst.model.mask().clone();
    let dirty: Vec<_> = inst
        .y
        .channels()
        .iter()
        .map(|c| {
            let noise = rng.normal_complex_image::<f64>(8, 6);
            let data = c
                .as_slice()
                .iter()
                .zip(noise.as_slice())
                .zip(mask.as_slice())
                .map(|((&v, &n), &m)| if m { v } else { n })
                .collect();
            jointrecon::image::ComplexImage::new(8, 6, data).unwrap()
        })
        .collect();
    // the constructor discards the off-mask entries
    let y2 = jointrecon::image::KSpaceData::masked(dirty, mask).unwrap();
    assert_eq!(y2, inst.y);
}

#[test]
fn prox_matches_dense_solve() {
    let mut rng = Rng::new(105);
    for (h, w) in [(1, 5), (6, 6), (9, 14), (16, 12)] {
        let u: RealImage<f64> = rng.normal_image(h, w);
        for mu in [1e-6, 1.0, 25.0] {
            for b in [Boundary::Neumann, Boundary::Dirichlet] {
                assert!(prox_gap(&u, mu, b) < 1e-8, "{h}x{w} mu {mu} {b:?}");
            }
        }
    }
}

#[test]
fn prox_is_self_adjoint_and_contractive() {
    let mut rng = Rng::new(106);
    let plan = SmoothingPlan::new(11, 7, Boundary::Neumann);
    let (a, b): (RealImage<f64>, RealImage<f64>) = (rng.normal_image(11, 7), rng.normal_image(11, 7));
    let qa = plan.smooth_q(&a, 0.3).unwrap();
    let qb = plan.smooth_q(&b, 0.3).unwrap();
    assert!((qa.dot(&b) - a.dot(&qb)).abs() < 1e-12 * (a.norm_sq() * b.norm_sq()).sqrt());
    assert!(qa.norm_sq() <= a.norm_sq());
}

#[test]
fn smallest_mu_keeps_only_the_mean() {
    let mut rng = Rng::new(107);
    let u: RealImage<f64> = rng.normal_image(12, 10);
    let mean = u.as_slice().iter().sum::<f64>() / 120.0;
    let v = SmoothingPlan::new(12, 10, Boundary::Neumann).smooth_q(&u, 1e-9).unwrap();
    assert!(v.as_slice().iter().all(|x| (x - mean).abs() < 1e-5));
}

#[test]
fn transforms_are_orthonormal_and_diagonalize_the_stencil() {
    let mut rng = Rng::new(108);
    let u: RealImage<f64> = rng.normal_image(7, 10);
    let s = dst2(&u);
    assert!((s.norm_sq() - u.norm_sq()).abs() < 1e-10 * u.norm_sq());
    assert!(idst2(&s).axpy(-1.0, &u).max_abs() < 1e-12);
    assert!((dct2(&u).norm_sq() - u.norm_sq()).abs() < 1e-10 * u.norm_sq());

    // an eigenvector from the stencil maps to a single coefficient
    for b in [Boundary::Neumann, Boundary::Dirichlet] {
        let t = LaplaceTransform::<f64>::new(7, 10, b);
        let mut e = vec![0.0; 70];
        e[2 * 10 + 3] = 1.0;
        let v = t.inverse(&RealImage::new(7, 10, e).unwrap());
        let lv = laplacian_apply(&v, b);
        let lambda = t.eigenvalue(2, 3);
        assert!(lv.axpy(-lambda, &v).max_abs() < 1e-12, "{b:?}");
        let c = t.forward(&v);
        assert!((c.get(2, 3) - 1.0).abs() < 1e-12);
        assert!((c.norm_sq() - 1.0).abs() < 1e-12);
    }
}

fn laplacian_apply(v: &RealImage<f64>, b: Boundary) -> RealImage<f64> {
    let (h, w) = v.shape();
    let at = |r: isize, c: isize| -> f64 {
        let inside = r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w;
        if inside {
            v.get(r as usize, c as usize)
        } else {
            match b {
                Boundary::Dirichlet => 0.0,
                Boundary::Neumann => v.get(r.clamp(0, h as isize - 1) as usize, c.clamp(0, w as isize - 1) as usize),
            }
        }
    };
    RealImage::from_fn(h, w, |r, c| {
        let (r, c) = (r as isize, c as isize);
        4.0 * at(r, c) - at(r - 1, c) - at(r + 1, c) - at(r, c - 1) - at(r, c + 1)
    })
    .unwrap()
}

#[test]
fn zf_init_recovers_normalized_maps_from_full_data() {
    let mut rng = Rng::new(109);
    let inst = random_instance(&mut rng, (10, 12), 3, 1.0);
    let full = SamplingMask::full(10, 12);
    let model = ForwardModel::new(full);
    let y = model.forward(&inst.x, &inst.coils).unwrap();
    let maps = zf_coil_maps(&model, &y).unwrap();
    let rho = rss(&inst.coils);
    for (m, c) in maps.iter().zip(inst.coils.iter()) {
        for ((a, b), r) in m.as_slice().iter().zip(c.as_slice()).zip(rho.as_slice()) {
            assert!((a - b / r).norm() < 1e-10);
        }
    }
    assert!(rss(&maps).as_slice().iter().all(|v| (v - 1.0).abs() < 1e-10));
    let g = zf_coil_init(&model, &y, CoilNormalization::SquaredNorm).unwrap();
    assert!((g.norm_sq() * maps.norm_sq() - 1.0).abs() < 1e-10);
    let n = zf_coil_init(&model, &y, CoilNormalization::Norm).unwrap();
    assert!((n.norm_sq() - 1.0).abs() < 1e-10);
    assert_eq!(zf_coil_init(&model, &y, CoilNormalization::None).unwrap(), maps);
}

#[test]
fn coil_update_with_zero_image_is_pure_smoothing() {
    let mut rng = Rng::new(110);
    let inst = random_instance(&mut rng, (8, 8), 2, 0.5);
    let plan = SmoothingPlan::new(8, 8, Boundary::Neumann);
    let zero = RealImage::zeros(8, 8);
    let a = plan.coil_update(&inst.model, &zero, &inst.coils, &inst.y, 0.7).unwrap();
    let b = plan.prox_coils(&inst.coils, 0.7).unwrap();
    assert_eq!(a, b);
    // and in general it is the composition of the two pieces
    let g = inst.model.grad_coils(&inst.x, &inst.coils, &inst.y).unwrap();
    let manual = plan.prox_coils(&inst.coils.axpy(-0.7, &g), 0.7).unwrap();
    let fused = plan.coil_update(&inst.model, &inst.x, &inst.coils, &inst.y, 0.7).unwrap();
    let diff: CoilSet<f64> = fused.axpy(-1.0, &manual);
    assert!(diff.norm_sq() < 1e-24);
}
