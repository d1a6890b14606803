//! Forward pass of the time-conditioned U-Net score model, in `f32`.

use crate::diffusion::score::ScoreFunction;
use crate::diffusion::weights::{NetArch, ScoreNetWeights, WeightTensor};
use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::scalar::Scalar;

/// Channel-major feature map.
#[derive(Clone, Debug)]
struct Features {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Features {
    fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w, data: vec![0.0; c * h * w] }
    }

    fn plane(&self, i: usize) -> &[f32] {
        &self.data[i * self.h * self.w..(i + 1) * self.h * self.w]
    }

    fn add(mut self, other: &Features) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        self
    }

    fn silu(mut self) -> Self {
        self.data.iter_mut().for_each(|v| *v = silu(*v));
        self
    }

    fn avg_pool2(&self) -> Self {
        let (h, w) = (self.h / 2, self.w / 2);
        let mut out = Features::zeros(self.c, h, w);
        for ch in 0..self.c {
            let src = self.plane(ch);
            for r in 0..h {
                for c in 0..w {
                    let p = 2 * r * self.w + 2 * c;
                    let s = src[p] + src[p + 1] + src[p + self.w] + src[p + self.w + 1];
                    out.data[(ch * h + r) * w + c] = 0.25 * s;
                }
            }
        }
        out
    }

    fn upsample2(&self) -> Self {
        let (h, w) = (self.h * 2, self.w * 2);
        let mut out = Features::zeros(self.c, h, w);
        for ch in 0..self.c {
            let src = self.plane(ch);
            for r in 0..h {
                for c in 0..w {
                    out.data[(ch * h + r) * w + c] = src[(r / 2) * self.w + c / 2];
                }
            }
        }
        out
    }
}

fn silu(v: f32) -> f32 {
    v / (1.0 + (-v).exp())
}

/// Zero-padded "same" convolution with an odd square kernel
/// `(out, in, k, k)` (cross-correlation, as in common deep-learning
/// frameworks).
fn conv2d(x: &Features, weight: &WeightTensor, bias: &WeightTensor) -> Features {
    let d = weight.dims();
    let (cout, cin, k) = (d[0], d[1], d[2]);
    debug_assert_eq!(cin, x.c);
    let pad = (k / 2) as isize;
    let (h, w) = (x.h as isize, x.w as isize);
    let wd = weight.data();
    let mut out = Features::zeros(cout, x.h, x.w);
    for o in 0..cout {
        let dst = &mut out.data[o * x.h * x.w..(o + 1) * x.h * x.w];
        dst.iter_mut().for_each(|v| *v = bias.data()[o]);
        for i in 0..cin {
            let src = x.plane(i);
            for ky in 0..k {
                let dy = ky as isize - pad;
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let wv = wd[((o * cin + i) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (r0, r1) = ((-dy).max(0), (h - dy).min(h));
                    let (c0, c1) = ((-dx).max(0), (w - dx).min(w));
                    if c0 >= c1 {
                        continue;
                    }
                    for r in r0..r1 {
                        let drow = (r * w) as usize;
                        let srow = ((r + dy) * w) as usize;
                        let dslice = &mut dst[drow + c0 as usize..drow + c1 as usize];
                        let sslice = &src[(srow as isize + c0 + dx) as usize..(srow as isize + c1 + dx) as usize];
                        for (a, b) in dslice.iter_mut().zip(sslice) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
    out
}

fn dense(x: &[f32], weight: &WeightTensor, bias: &WeightTensor) -> Vec<f32> {
    let (rows, cols) = (weight.dims()[0], weight.dims()[1]);
    (0..rows)
        .map(|o| {
            let row = &weight.data()[o * cols..(o + 1) * cols];
            bias.data()[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f32>()
        })
        .collect()
}

/// Score network with validated weights. Cheap to share across threads.
#[derive(Clone, Debug)]
pub struct ScoreNet {
    weights: ScoreNetWeights,
}

impl ScoreNet {
    pub fn new(weights: ScoreNetWeights) -> Self {
        Self { weights }
    }

    pub fn arch(&self) -> &NetArch {
        self.weights.arch()
    }

    pub fn weights(&self) -> &ScoreNetWeights {
        &self.weights
    }

    fn t(&self, name: &str) -> &WeightTensor {
        // presence is guaranteed by ScoreNetWeights validation
        self.weights.tensor(name).expect("validated weights")
    }

    fn embed(&self, sigma: f32) -> Vec<f32> {
        let t = sigma.ln();
        let freqs = self.t("embed.freqs").data();
        let tau = 2.0 * std::f32::consts::PI;
        let proj: Vec<f32> = freqs.iter().map(|f| tau * f * t).collect();
        let mut feats: Vec<f32> = proj.iter().map(|v| v.sin()).collect();
        feats.extend(proj.iter().map(|v| v.cos()));
        let e = dense(&feats, self.t("embed.dense0.weight"), self.t("embed.dense0.bias"));
        let e: Vec<f32> = e.into_iter().map(silu).collect();
        let e = dense(&e, self.t("embed.dense1.weight"), self.t("embed.dense1.bias"));
        e.into_iter().map(silu).collect()
    }

    fn block(&self, name: &str, x: &Features, emb: &[f32]) -> Features {
        let t = |s: &str| self.t(&format!("{name}.{s}"));
        let mut h = conv2d(x, t("conv1.weight"), t("conv1.bias"));
        let shift = dense(emb, t("emb.weight"), t("emb.bias"));
        let plane = h.h * h.w;
        for (ch, s) in shift.iter().enumerate() {
            h.data[ch * plane..(ch + 1) * plane].iter_mut().for_each(|v| *v += s);
        }
        let h = h.silu();
        conv2d(&h, t("conv2.weight"), t("conv2.bias")).silu()
    }

    /// Raw network output (an estimate of `sigma * score`) for a single
    /// channel `f32` image stored row-major.
    pub fn forward_raw(&self, height: usize, width: usize, x: &[f32], sigma: f32) -> Result<Vec<f32>> {
        let k = self.arch().downsampling();
        if height == 0 || width == 0 || height % k != 0 || width % k != 0 {
            return Err(Error::shape(format!("network input {height}x{width} must be a nonzero multiple of {k}")));
        }
        if x.len() != height * width {
            return Err(Error::shape(format!("expected {} pixels, got {}", height * width, x.len())));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("noise level must be positive, got {sigma}")));
        }
        let emb = self.embed(sigma);
        let top = self.arch().levels() - 1;
        let mut skips = Vec::with_capacity(top + 1);
        let mut h = Features { c: 1, h: height, w: width, data: x.to_vec() };
        for l in 0..=top {
            if l > 0 {
                h = h.avg_pool2();
            }
            h = self.block(&format!("enc{l}"), &h, &emb);
            skips.push(h.clone());
        }
        h = self.block("mid", &h, &emb);
        for l in (0..=top).rev() {
            if l < top {
                let up = h.upsample2();
                h = conv2d(&up, self.t(&format!("dec{l}.match.weight")), self.t(&format!("dec{l}.match.bias")));
            }
            h = self.block(&format!("dec{l}"), &h.add(&skips[l]), &emb);
        }
        Ok(conv2d(&h, self.t("head.weight"), self.t("head.bias")).data)
    }
}

impl<T: Scalar> ScoreFunction<T> for ScoreNet {
    fn score(&self, x: &RealImage<T>, sigma: T) -> Result<RealImage<T>> {
        let input: Vec<f32> = x.as_slice().iter().map(|v| v.as_f64() as f32).collect();
        let s = sigma.as_f64() as f32;
        let raw = self.forward_raw(x.height(), x.width(), &input, s)?;
        let data = raw.into_iter().map(|v| T::lit((v / s) as f64)).collect();
        RealImage::new(x.height(), x.width(), data)
    }
}
