//! Reconstruction quality metrics and the zero-filled and TV baselines.

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coil_estimation::{zf_coil_init, CoilNormalization, SmoothingPlan};
use crate::diffusion::StepSchedule;
use crate::error::{Error, Result};
use crate::finite_diff::{gradient, gradient_adjoint, Gradient};
use crate::forward_model::{rss, zero_filled_rss, ForwardModel, RSS_FLOOR};
use crate::image::{CoilSet, KSpaceData, RealImage};
use crate::scalar::Scalar;
use crate::spectral::Boundary;

/// `10 log10(n |gt|_inf^2 / |x - gt|^2)`; `+inf` when the images agree.
pub fn psnr<T: Scalar>(x: &RealImage<T>, gt: &RealImage<T>) -> Result<f64> {
    if x.shape() != gt.shape() {
        return Err(Error::shape(format!("psnr of {:?} against {:?}", x.shape(), gt.shape())));
    }
    let peak = gt.max_abs().as_f64();
    if peak == 0.0 {
        return Err(Error::domain("psnr undefined for an all-zero reference"));
    }
    let err: f64 = x.as_slice().iter().zip(gt.as_slice()).map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2)).sum();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (gt.len() as f64 * peak * peak / err).log10())
}

/// Pointwise rank-1 fit residual of fully sampled coil images against the
/// normalized maps `c_j / rss(coils)`: `z_j - c_j p` with
/// `p = sum_j conj(c_j) z_j`. Returns the RSS of the residual and its norm.
pub fn nullspace_residual<T: Scalar>(y_full: &KSpaceData<T>, coils: &CoilSet<T>) -> Result<(RealImage<T>, T)> {
    if y_full.coil_count() != coils.len() || y_full.shape() != coils.shape() {
        return Err(Error::shape(format!(
            "{} channels of {:?} against {} coils of {:?}",
            y_full.coil_count(),
            y_full.shape(),
            coils.len(),
            coils.shape()
        )));
    }
    let model = ForwardModel::new(y_full.mask().clone());
    let z = model.zero_filled(y_full);
    let floor = T::lit(RSS_FLOOR);
    let rho = rss(coils);
    let (h, w) = coils.shape();
    let mut acc = vec![T::zero(); h * w];
    for p in 0..h * w {
        let r = rho.as_slice()[p].max(floor);
        let chat: Vec<Complex<T>> = coils.iter().map(|c| c.as_slice()[p] / r).collect();
        let proj: Complex<T> = chat.iter().zip(&z).map(|(c, zj)| c.conj() * zj.as_slice()[p]).sum();
        acc[p] = chat.iter().zip(&z).map(|(c, zj)| (zj.as_slice()[p] - c * proj).norm_sqr()).sum();
    }
    let norm = acc.iter().copied().sum::<T>().sqrt();
    Ok((RealImage::new(h, w, acc.into_iter().map(|v| v.sqrt()).collect())?, norm))
}

/// `rss(F^-1 y)`.
pub fn zf_reconstruct<T: Scalar>(y: &KSpaceData<T>) -> RealImage<T> {
    let model = ForwardModel::new(y.mask().clone());
    zero_filled_rss(model.fft(), y)
}

/// Number of knots of the intensity correction.
pub const INTENSITY_KNOTS: usize = 10;

/// Nondecreasing piecewise-linear map with equispaced knots, constant
/// beyond the end knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityMap {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl IntensityMap {
    pub fn apply(&self, v: f64) -> f64 {
        let k = &self.knots;
        let n = k.len();
        if v <= k[0] {
            return self.values[0];
        }
        if v >= k[n - 1] {
            return self.values[n - 1];
        }
        let step = (k[n - 1] - k[0]) / (n - 1) as f64;
        let i = (((v - k[0]) / step).floor() as usize).min(n - 2);
        let s = (v - k[i]) / (k[i + 1] - k[i]);
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    pub fn apply_image<T: Scalar>(&self, x: &RealImage<T>) -> RealImage<T> {
        x.map(|v| T::lit(self.apply(v.as_f64())))
    }
}

/// Value of each cumulative basis function `G_m(a) = sum_{k >= m} phi_k(a)`
/// for `m = 1..K-1`, where `phi_k` are the hat functions on the knots.
fn cumulative_basis(a: f64, lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let t = ((a - lo) / (hi - lo) * (k - 1) as f64).clamp(0.0, (k - 1) as f64);
    (1..k).map(|m| (t - (m - 1) as f64).clamp(0.0, 1.0)).collect()
}

/// Least-squares fit of a monotone map sending recon values to reference
/// values, over the observed recon range.
pub fn fit_intensity_map(pairs: &[(f64, f64)]) -> Result<IntensityMap> {
    if pairs.len() < 2 {
        return Err(Error::domain("need at least two intensity pairs"));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::NonFinite("intensity pairs".into()));
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1e-300)) {
        return Err(Error::domain("recon intensities are all equal; intensity map is not identifiable"));
    }
    let k = INTENSITY_KNOTS;
    let n = pairs.len() as f64;
    let rows: Vec<Vec<f64>> = pairs.iter().map(|p| cumulative_basis(p.0, lo, hi, k)).collect();
    let mean_row: Vec<f64> = (0..k - 1).map(|m| rows.iter().map(|r| r[m]).sum::<f64>() / n).collect();
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    // Normal equations of the centered problem; the intercept is eliminated.
    let mut q = vec![vec![0.0; k - 1]; k - 1];
    let mut c = vec![0.0; k - 1];
    for (r, p) in rows.iter().zip(pairs) {
        let rc: Vec<f64> = r.iter().zip(&mean_row).map(|(a, m)| a - m).collect();
        let bc = p.1 - mean_b;
        for i in 0..k - 1 {
            c[i] += rc[i] * bc;
            for j in 0..k - 1 {
                q[i][j] += rc[i] * rc[j];
            }
        }
    }
    let d = nnls_normal(&q, &c);
    let v0 = mean_b - mean_row.iter().zip(&d).map(|(m, x)| m * x).sum::<f64>();
    let mut values = Vec::with_capacity(k);
    let mut acc = v0;
    values.push(acc);
    for x in &d {
        acc += x;
        values.push(acc);
    }
    let knots = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
    Ok(IntensityMap { knots, values })
}

/// `min 1/2 d'Qd - c'd` subject to `d >= 0` (Lawson-Hanson active set).
fn nnls_normal(q: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let scale = (0..n).map(|i| q[i][i]).fold(0.0, f64::max).max(1e-300);
    let ridge = 1e-13 * scale;
    let tol = 1e-12 * scale.max(c.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let solve_on = |set: &[usize]| -> Vec<f64> {
        let m = set.len();
        let mut a: Vec<Vec<f64>> = set.iter().map(|&i| set.iter().map(|&j| q[i][j]).collect()).collect();
        let mut b: Vec<f64> = set.iter().map(|&i| c[i]).collect();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += ridge;
        }
        solve_dense(&mut a, &mut b);
        debug_assert_eq!(b.len(), m);
        b
    };
    let grad = |d: &[f64]| -> Vec<f64> { (0..n).map(|i| c[i] - (0..n).map(|j| q[i][j] * d[j]).sum::<f64>()).collect() };
    let mut d = vec![0.0; n];
    let mut passive = vec![false; n];
    for _ in 0..10 * n + 10 {
        let w = grad(&d);
        let cand = (0..n).filter(|&i| !passive[i]).max_by(|&a, &b| w[a].total_cmp(&w[b]));
        match cand {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        loop {
            let set: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let s = solve_on(&set);
            if s.iter().all(|&v| v > 0.0) {
                for (&i, &v) in set.iter().zip(&s) {
                    d[i] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&i, &v) in set.iter().zip(&s) {
                if v <= 0.0 {
                    alpha = alpha.min(d[i] / (d[i] - v));
                }
            }
            for (&i, &v) in set.iter().zip(&s) {
                d[i] += alpha * (v - d[i]);
                if d[i] <= 1e-15 * scale {
                    d[i] = 0.0;
                    passive[i] = false;
                }
            }
            if set.iter().all(|&i| !passive[i]) {
                break;
            }
        }
    }
    d
}

/// Gaussian elimination with partial pivoting; the solution replaces `b`.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        if p == 0.0 {
            continue;
        }
        for r in col + 1..n {
            let f = a[r][col] / p;
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| a[col][k] * b[k]).sum();
        b[col] = if a[col][col] == 0.0 { 0.0 } else { (b[col] - s) / a[col][col] };
    }
}

/// `sum_p sqrt(|(D x)_p|^2 + eps^2)`.
pub fn charbonnier_tv<T: Scalar>(x: &RealImage<T>, eps: T) -> T {
    let g = gradient(x);
    g.rows.as_slice().iter().zip(g.cols.as_slice()).map(|(&a, &b)| (a * a + b * b + eps * eps).sqrt()).sum()
}

pub fn charbonnier_tv_grad<T: Scalar>(x: &RealImage<T>, eps: T) -> RealImage<T> {
    let g = gradient(x);
    let norm: Vec<T> = g.rows.as_slice().iter().zip(g.cols.as_slice()).map(|(&a, &b)| (a * a + b * b + eps * eps).sqrt()).collect();
    let div = |u: &RealImage<T>| u.zip_map(&RealImage::new(u.height(), u.width(), norm.clone()).expect("same shape"), |a, n| a / n);
    gradient_adjoint(&Gradient { rows: div(&g.rows), cols: div(&g.cols) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvParams {
    /// Regularization weight `w`.
    pub weight: f64,
    /// Charbonnier smoothing `eps`.
    pub epsilon: f64,
    pub iterations: usize,
    /// Initial image step; reduced by backtracking when needed.
    pub step: f64,
    /// Coil step / smoothing schedule, indexed like the sampler's.
    pub mu: StepSchedule,
    pub coil_update: bool,
    pub coil_normalization: CoilNormalization,
    pub boundary: Boundary,
}

impl Default for TvParams {
    fn default() -> Self {
        Self {
            weight: 2e-3,
            epsilon: 1e-2,
            iterations: 200,
            step: 1.0,
            mu: StepSchedule::Exponential { first: 1e-6, last: 25.0 },
            coil_update: true,
            coil_normalization: CoilNormalization::SquaredNorm,
            boundary: Boundary::Neumann,
        }
    }
}

impl TvParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(self.weight >= 0.0 && self.weight.is_finite()) || !pos(self.epsilon) || !pos(self.step) || self.iterations == 0 {
            return Err(Error::domain(format!("invalid TV parameters {self:?}")));
        }
        self.mu.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TvResult<T> {
    pub image: RealImage<T>,
    pub coils: CoilSet<T>,
    /// Objective `D + w TV` after each outer iteration, starting with the
    /// initial value.
    pub objective: Vec<T>,
}

/// Alternating minimization of `D(x, S) + w TV_eps(x)`: a backtracking
/// gradient step on the image, then a proximal coil step that is kept only
/// if it does not increase `D`.
pub fn tv_reconstruct<T: Scalar>(y: &KSpaceData<T>, params: &TvParams) -> Result<TvResult<T>> {
    params.validate()?;
    let model = ForwardModel::new(y.mask().clone());
    let (h, w) = y.shape();
    let plan = SmoothingPlan::new(h, w, params.boundary);
    let (wt, eps) = (T::lit(params.weight), T::lit(params.epsilon));
    let energy = |x: &RealImage<T>, s: &CoilSet<T>| -> Result<T> {
        let tv = if params.weight > 0.0 { wt * charbonnier_tv(x, eps) } else { T::zero() };
        Ok(model.data_fidelity(x, s, y)? + tv)
    };
    let mut x = zero_filled_rss(model.fft(), y);
    let mut coils = zf_coil_init(&model, y, params.coil_normalization)?;
    let mut e = energy(&x, &coils)?;
    let mut trace = vec![e];
    let mut t = T::lit(params.step);
    let n = params.iterations;
    for k in 0..n {
        let mut g = model.grad_image(&x, &coils, y)?;
        if params.weight > 0.0 {
            g = g.axpy(wt, &charbonnier_tv_grad(&x, eps));
        }
        let g2 = g.norm_sq();
        if g2 > T::zero() {
            let mut accepted = false;
            for _ in 0..40 {
                let cand = x.axpy(-t, &g);
                let ec = energy(&cand, &coils)?;
                if ec <= e - T::lit(0.5) * t * g2 {
                    x = cand;
                    e = ec;
                    accepted = true;
                    break;
                }
                t = t * T::lit(0.5);
            }
            if accepted {
                t = (t * T::lit(2.0)).min(T::lit(params.step));
            }
        }
        if params.coil_update {
            let mu = T::lit(params.mu.at(n - k, n)?);
            let cand = plan.coil_update(&model, &x, &coils, y, mu)?;
            let ec = energy(&x, &cand)?;
            if ec <= e && cand.is_finite() {
                coils = cand;
                e = ec;
            }
        }
        if !x.is_finite() {
            return Err(Error::Numerical { step: k, what: "non-finite TV iterate".into() });
        }
        trace.push(e);
    }
    Ok(TvResult { image: x, coils, objective: trace })
}

/// Which reconstruction produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Diffusion,
    Tv,
    Zf,
}

/// One row of the metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub case_id: String,
    pub mask_spec: String,
    pub method: Method,
    /// `+inf` is written as the string `"inf"`.
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub psnr_db: f64,
    pub nullspace_norm: Option<f64>,
    pub runtime_s: Option<f64>,
}

fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        Err(serde::ser::Error::custom("psnr must be finite or +inf"))
    }
}

fn de_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Str(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Str(s) if s == "inf" => Ok(f64::INFINITY),
        Db::Str(s) => Err(serde::de::Error::custom(format!("unexpected psnr value {s:?}"))),
    }
}
