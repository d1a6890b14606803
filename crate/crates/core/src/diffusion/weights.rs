//! "SDW1" weight files and the architecture descriptor they are checked
//! against.
//!
//! Layout (little-endian): magic `SDW1`, `u32` version, `u32` tensor count,
//! then per tensor a `u16` name length, the UTF-8 name, a `u8` ndim, `ndim`
//! `u32` dims and the row-major `f32` payload. Conv kernels are
//! `(out, in, kh, kw)`, dense matrices `(out, in)`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MAGIC: [u8; 4] = *b"SDW1";
pub const VERSION: u32 = 1;

/// One named `f32` array.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl WeightTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!("dims {dims:?} need {n} values, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { dims, data: vec![0.0; n] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Raw contents of an SDW1 file, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightFile {
    pub tensors: Vec<(String, WeightTensor)>,
}

impl WeightFile {
    pub fn get(&self, name: &str) -> Option<&WeightTensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u32::try_from(self.tensors.len()).map_err(|_| Error::domain("too many tensors"))?.to_le_bytes());
        for (name, t) in &self.tensors {
            let len = u16::try_from(name.len()).map_err(|_| Error::domain(format!("tensor name too long: {name}")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let nd = u8::try_from(t.dims.len()).map_err(|_| Error::domain("too many dimensions"))?;
            out.push(nd);
            for &d in &t.dims {
                let d = u32::try_from(d).map_err(|_| Error::domain("dimension exceeds u32"))?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic { expected: MAGIC, found: magic });
        }
        let version = cur.u32("version")?;
        if version != VERSION {
            return Err(Error::Version(version));
        }
        let count = cur.u32("tensor count")? as usize;
        let mut tensors: Vec<(String, WeightTensor)> = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = u16::from_le_bytes(cur.take(2, "name length")?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(cur.take(len, "name")?)
                .map_err(|_| Error::domain("tensor name is not UTF-8"))?
                .to_owned();
            if tensors.iter().any(|(n, _)| *n == name) {
                return Err(Error::domain(format!("duplicate tensor `{name}`")));
            }
            let nd = cur.take(1, "ndim")?[0] as usize;
            let dims = (0..nd).map(|_| cur.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::domain("tensor too large"))?;
            let raw = cur.take(n.checked_mul(4).ok_or_else(|| Error::domain("tensor too large"))?, &name)?;
            let data: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("tensor `{name}`")));
            }
            tensors.push((name, WeightTensor { dims, data }));
        }
        if cur.pos != bytes.len() {
            return Err(Error::domain(format!("{} trailing bytes after last tensor", bytes.len() - cur.pos)));
        }
        Ok(Self { tensors })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode()?)?;
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!("reading {what} at byte {}", self.pos))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Shape parameters of the score network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArch {
    /// Channel width per resolution level, finest first.
    pub widths: Vec<usize>,
    /// Number of Fourier frequencies; the raw embedding has twice as many
    /// entries.
    pub fourier_features: usize,
    /// Width of the two dense embedding layers.
    pub embed_dim: usize,
}

impl Default for NetArch {
    fn default() -> Self {
        Self { widths: vec![16, 32, 64], fourier_features: 64, embed_dim: 128 }
    }
}

impl NetArch {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) || self.fourier_features == 0 || self.embed_dim == 0 {
            return Err(Error::domain(format!("degenerate network architecture {self:?}")));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.widths.len()
    }

    /// Spatial sizes must be divisible by this.
    pub fn downsampling(&self) -> usize {
        1 << (self.levels() - 1)
    }

    /// Every tensor the architecture needs, in canonical file order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let e = self.embed_dim;
        let mut out = vec![
            ("embed.freqs".to_owned(), vec![self.fourier_features]),
            ("embed.dense0.weight".to_owned(), vec![e, 2 * self.fourier_features]),
            ("embed.dense0.bias".to_owned(), vec![e]),
            ("embed.dense1.weight".to_owned(), vec![e, e]),
            ("embed.dense1.bias".to_owned(), vec![e]),
        ];
        let block = |out: &mut Vec<(String, Vec<usize>)>, name: &str, cin: usize, cout: usize| {
            out.push((format!("{name}.conv1.weight"), vec![cout, cin, 3, 3]));
            out.push((format!("{name}.conv1.bias"), vec![cout]));
            out.push((format!("{name}.emb.weight"), vec![cout, e]));
            out.push((format!("{name}.emb.bias"), vec![cout]));
            out.push((format!("{name}.conv2.weight"), vec![cout, cout, 3, 3]));
            out.push((format!("{name}.conv2.bias"), vec![cout]));
        };
        let w = &self.widths;
        let top = w.len() - 1;
        for l in 0..=top {
            let cin = if l == 0 { 1 } else { w[l - 1] };
            block(&mut out, &format!("enc{l}"), cin, w[l]);
        }
        block(&mut out, "mid", w[top], w[top]);
        for l in (0..=top).rev() {
            if l < top {
                out.push((format!("dec{l}.match.weight"), vec![w[l], w[l + 1], 1, 1]));
                out.push((format!("dec{l}.match.bias"), vec![w[l]]));
            }
            block(&mut out, &format!("dec{l}"), w[l], w[l]);
        }
        out.push(("head.weight".to_owned(), vec![1, w[0], 1, 1]));
        out.push(("head.bias".to_owned(), vec![1]));
        out
    }
}

/// Shape-checked network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreNetWeights {
    arch: NetArch,
    tensors: BTreeMap<String, WeightTensor>,
}

impl ScoreNetWeights {
    /// Checks that every tensor the architecture names is present with the
    /// right shape; missing tensors are reported before shape mismatches,
    /// and tensors the architecture does not use are rejected.
    pub fn from_file(file: WeightFile, arch: NetArch) -> Result<Self> {
        arch.validate()?;
        let expected = arch.tensor_shapes();
        for (name, _) in &expected {
            if file.get(name).is_none() {
                return Err(Error::MissingTensor(name.clone()));
            }
        }
        for (name, dims) in &expected {
            let found = file.get(name).unwrap().dims();
            if found != dims.as_slice() {
                return Err(Error::TensorShape { name: name.clone(), expected: dims.clone(), found: found.to_vec() });
            }
        }
        if let Some((extra, _)) = file.tensors.iter().find(|(n, _)| !expected.iter().any(|(e, _)| e == n)) {
            return Err(Error::domain(format!("unexpected tensor `{extra}`")));
        }
        Ok(Self { arch, tensors: file.tensors.into_iter().collect() })
    }

    pub fn zeros(arch: NetArch) -> Result<Self> {
        Self::filled_with(arch, |_, dims| WeightTensor::zeros(dims))
    }

    /// Scaled-normal initialization (`1/sqrt(fan_in)`), frequencies with
    /// unit standard deviation. For tests and smoke runs.
    pub fn random(arch: NetArch, rng: &mut Rng) -> Result<Self> {
        Self::filled_with(arch, |name, dims| {
            let n: usize = dims.iter().product();
            let fan_in: usize = if dims.len() > 1 { dims[1..].iter().product() } else { 1 };
            let scale = if name.ends_with(".bias") { 0.1 } else { 1.0 / (fan_in as f64).sqrt() };
            let data = (0..n).map(|_| (rng.normal() * scale) as f32).collect();
            WeightTensor { dims, data }
        })
    }

    fn filled_with(arch: NetArch, mut f: impl FnMut(&str, Vec<usize>) -> WeightTensor) -> Result<Self> {
        arch.validate()?;
        let tensors = arch.tensor_shapes().into_iter().map(|(n, d)| {
            let t = f(&n, d);
            (n, t)
        });
        Ok(Self { tensors: tensors.collect(), arch })
    }

    pub fn arch(&self) -> &NetArch {
        &self.arch
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Result<&WeightTensor> {
        self.tensors.get(name).ok_or_else(|| Error::MissingTensor(name.to_owned()))
    }

    /// Back to file form, in canonical order.
    pub fn to_file(&self) -> WeightFile {
        WeightFile {
            tensors: self.arch.tensor_shapes().into_iter().map(|(n, _)| {
                let t = self.tensors[&n].clone();
                (n, t)
            }).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_file().write(path)
    }
}

pub fn load_weights(path: impl AsRef<Path>, arch: NetArch) -> Result<ScoreNetWeights> {
    ScoreNetWeights::from_file(WeightFile::read(path)?, arch)
}
