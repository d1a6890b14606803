//! `TNSR` binary tensor files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content                                    |
//! |-------|--------------------------------------------|
//! | 4     | magic `TNSR`                               |
//! | 4     | `u32` version, currently 1                 |
//! | 1     | dtype: 0 = real64, 1 = complex128          |
//! | 1     | `u8` ndim                                  |
//! | 8·nd  | `u64` dims, outermost first                |
//! | ...   | row-major payload, complex as (re, im)     |
//!
//! 2-D tensors are images, 3-D tensors are stacks with the leading axis
//! indexing the stack (coils, or k-space channels).

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::image::{CoilSet, ComplexImage, RealImage};
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"TNSR";
pub const VERSION: u32 = 1;

const DTYPE_REAL64: u8 = 0;
const DTYPE_COMPLEX128: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Tensor<T> {
    Real(RealImage<T>),
    Complex(ComplexImage<T>),
    RealStack(Vec<RealImage<T>>),
    Coils(CoilSet<T>),
}

impl<T: Scalar> Tensor<T> {
    fn dims(&self) -> Vec<usize> {
        match self {
            Tensor::Real(x) => vec![x.height(), x.width()],
            Tensor::Complex(x) => vec![x.height(), x.width()],
            Tensor::RealStack(xs) => vec![xs.len(), xs[0].height(), xs[0].width()],
            Tensor::Coils(s) => vec![s.len(), s.shape().0, s.shape().1],
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Tensor::Real(_) => "real image",
            Tensor::Complex(_) => "complex image",
            Tensor::RealStack(_) => "real stack",
            Tensor::Coils(_) => "coil set",
        }
    }

    pub fn into_real(self) -> Result<RealImage<T>> {
        match self {
            Tensor::Real(x) => Ok(x),
            other => Err(Error::shape(format!("expected real image, found {}", other.kind()))),
        }
    }

    pub fn into_complex(self) -> Result<ComplexImage<T>> {
        match self {
            Tensor::Complex(x) => Ok(x),
            other => Err(Error::shape(format!("expected complex image, found {}", other.kind()))),
        }
    }

    pub fn into_real_stack(self) -> Result<Vec<RealImage<T>>> {
        match self {
            Tensor::RealStack(x) => Ok(x),
            Tensor::Real(x) => Ok(vec![x]),
            other => Err(Error::shape(format!("expected real stack, found {}", other.kind()))),
        }
    }

    pub fn into_coils(self) -> Result<CoilSet<T>> {
        match self {
            Tensor::Coils(x) => Ok(x),
            Tensor::Complex(x) => CoilSet::new(vec![x]),
            other => Err(Error::shape(format!("expected coil stack, found {}", other.kind()))),
        }
    }
}

/// Serializes a tensor to bytes.
pub fn encode<T: Scalar>(t: &Tensor<T>) -> Result<Vec<u8>> {
    let (dtype, values): (u8, Vec<f64>) = match t {
        Tensor::Real(x) => (DTYPE_REAL64, x.as_slice().iter().map(|v| v.as_f64()).collect()),
        Tensor::RealStack(xs) => {
            let shape = xs.first().ok_or_else(|| Error::shape("empty real stack"))?.shape();
            if xs.iter().any(|x| x.shape() != shape) {
                return Err(Error::shape("real stack images differ in shape"));
            }
            (
                DTYPE_REAL64,
                xs.iter().flat_map(|x| x.as_slice().iter().map(|v| v.as_f64())).collect(),
            )
        }
        Tensor::Complex(x) => (DTYPE_COMPLEX128, complex_values(x.as_slice())),
        Tensor::Coils(s) => (
            DTYPE_COMPLEX128,
            s.iter().flat_map(|c| complex_values(c.as_slice())).collect(),
        ),
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} value {i}; refusing to write", t.kind())));
    }
    let dims = t.dims();
    let mut out = Vec::with_capacity(10 + 8 * dims.len() + 8 * values.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype);
    out.push(dims.len() as u8);
    for d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn complex_values<T: Scalar>(data: &[Complex<T>]) -> Vec<f64> {
    data.iter().flat_map(|z| [z.re.as_f64(), z.im.as_f64()]).collect()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "{what}: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Parses bytes produced by [`encode`].
pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Tensor<T>> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: magic });
    }
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let dtype = cur.take(1, "dtype")?[0];
    let width_per = match dtype {
        DTYPE_REAL64 => 1,
        DTYPE_COMPLEX128 => 2,
        other => return Err(Error::UnknownDtype(other)),
    };
    let ndim = cur.take(1, "ndim")?[0] as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = u64::from_le_bytes(cur.take(8, "dims")?.try_into().expect("8 bytes"));
        dims.push(usize::try_from(d).map_err(|_| Error::shape("dimension overflows usize"))?);
    }
    if !(ndim == 2 || ndim == 3) || dims.iter().any(|&d| d == 0) {
        return Err(Error::shape(format!("unsupported tensor dims {dims:?}")));
    }
    let count = dims
        .iter()
        .try_fold(width_per, |acc: usize, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::shape("tensor size overflows"))?;
    let payload = cur.take(count.checked_mul(8).ok_or_else(|| Error::shape("tensor size overflows"))?, "payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::shape(format!("{} trailing bytes after payload", bytes.len() - cur.pos)));
    }
    let values: Vec<T> = payload
        .chunks_exact(8)
        .map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8 bytes"))))
        .collect();

    let (h, w) = (dims[ndim - 2], dims[ndim - 1]);
    let plane = h * w;
    let tensor = match (dtype, ndim) {
        (DTYPE_REAL64, 2) => Tensor::Real(RealImage::new(h, w, values)?),
        (DTYPE_REAL64, _) => Tensor::RealStack(
            values
                .chunks_exact(plane)
                .map(|c| RealImage::new(h, w, c.to_vec()))
                .collect::<Result<_>>()?,
        ),
        (_, 2) => Tensor::Complex(ComplexImage::new(h, w, pair_up(&values))?),
        _ => Tensor::Coils(CoilSet::new(
            values
                .chunks_exact(2 * plane)
                .map(|c| ComplexImage::new(h, w, pair_up(c)))
                .collect::<Result<_>>()?,
        )?),
    };
    Ok(tensor)
}

fn pair_up<T: Scalar>(v: &[T]) -> Vec<Complex<T>> {
    v.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect()
}

pub fn tensor_write<T: Scalar>(path: impl AsRef<Path>, t: &Tensor<T>) -> Result<()> {
    let bytes = encode(t)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn tensor_read<T: Scalar>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    decode(&fs::read(path)?)
}
