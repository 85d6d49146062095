use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"GPTN";
const HEADER_LEN: usize = 16;

/// Dense channel-major `C×H×W` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} values ({channels}x{height}x{width})"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Tensor {
            channels,
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn index(&self, c: usize, v: usize, u: usize) -> usize {
        (c * self.height + v) * self.width + u
    }

    #[inline]
    pub fn at(&self, c: usize, v: usize, u: usize) -> f64 {
        self.data[self.index(c, v, u)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, v: usize, u: usize, value: f64) {
        let i = self.index(c, v, u);
        self.data[i] = value;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Fills one channel with a constant.
    pub fn fill_channel(&mut self, c: usize, value: f64) {
        self.plane_mut(c).fill(value);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        for d in [self.channels, self.height, self.width] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(path, 0, "truncated tensor header"));
        }
        if &bytes[..4] != TENSOR_MAGIC {
            return Err(Error::format(path, 0, "bad tensor magic"));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (c, h, w) = (dim(0), dim(1), dim(2));
        let n = c
            .checked_mul(h)
            .and_then(|x| x.checked_mul(w))
            .ok_or_else(|| Error::format(path, 4, "tensor dimensions overflow"))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * n {
            return Err(Error::format(
                path,
                HEADER_LEN as u64,
                format!("expected {} payload bytes for {c}x{h}x{w}, found {}", 4 * n, body.len()),
            ));
        }
        let data = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Tensor::from_data(c, h, w, data)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Tensor::from_bytes(&bytes, path)
    }
}
